#include "minrepair/sandbox.hpp"

#include <fcntl.h>
#include <grp.h>
#include <poll.h>
#include <sched.h>
#include <signal.h>
#include <sys/prctl.h>
#include <sys/resource.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <thread>

#include "minrepair/error.hpp"

namespace minrepair::sandbox {

namespace {

using Clock = std::chrono::steady_clock;

std::string errno_text(const std::string& what, int err) { return what + ": " + std::strerror(err); }

std::vector<char*> c_strings(std::vector<std::string>& items) {
    std::vector<char*> out;
    out.reserve(items.size() + 1);
    for (auto& s : items) out.push_back(s.data());
    out.push_back(nullptr);
    return out;
}

int open_or_throw(const std::filesystem::path& path, int flags) {
    const int fd = ::open(path.c_str(), flags | O_CLOEXEC, 0644);
    if (fd < 0) throw InfraError(errno_text("open " + path.string(), errno));
    return fd;
}

void ignore_sigpipe_once() {
    static std::once_flag flag;
    std::call_once(flag, [] { ::signal(SIGPIPE, SIG_IGN); });
}

int pidfd_open(pid_t pid) { return static_cast<int>(::syscall(SYS_pidfd_open, pid, 0)); }

// Child side of run(): only async-signal-safe calls from here to execve.
[[noreturn]] void exec_child(const RunSpec& spec, int in_fd, int out_fd, int err_fd, int report_fd, char* const* argv,
                             char* const* envp, bool drop_root) {
    const auto fail = [report_fd](int step) {
        const int payload[2] = {step, errno};
        [[maybe_unused]] const auto n = ::write(report_fd, payload, sizeof payload);
        ::_exit(127);
    };
    ::setpgid(0, 0);
    ::prctl(PR_SET_PDEATHSIG, SIGKILL);
    if (::dup2(in_fd, STDIN_FILENO) < 0 || ::dup2(out_fd, STDOUT_FILENO) < 0 || ::dup2(err_fd, STDERR_FILENO) < 0) {
        fail(1);
    }
    if (spec.isolate_network) {
        // Without CAP_SYS_ADMIN this fails; the language-level guard still applies.
        ::unshare(CLONE_NEWNET);
    }
    const auto limit = [&](int resource, rlim_t soft, rlim_t hard) {
        const rlimit rl{soft, hard};
        if (::setrlimit(resource, &rl) != 0) fail(2);
    };
    const auto cpu_s = static_cast<rlim_t>((spec.limits.time_ms + 999) / 1000 + 1);
    limit(RLIMIT_CPU, cpu_s, cpu_s + 1);
    limit(RLIMIT_AS, static_cast<rlim_t>(spec.limits.memory_kib) * 1024, static_cast<rlim_t>(spec.limits.memory_kib) * 1024);
    limit(RLIMIT_FSIZE, static_cast<rlim_t>(spec.limits.output_bytes), static_cast<rlim_t>(spec.limits.output_bytes));
    limit(RLIMIT_CORE, 0, 0);
    limit(RLIMIT_NOFILE, 64, 64);
    if (::chdir(spec.workdir.c_str()) != 0) fail(3);
    if (drop_root) {
        if (::setgroups(0, nullptr) != 0) fail(4);
        if (::setgid(kNobodyId) != 0) fail(4);
        if (::setuid(kNobodyId) != 0) fail(4);
        limit(RLIMIT_NPROC, 64, 64);
    }
    ::execve(argv[0], argv, envp);
    fail(5);
}

}  // namespace

RunOutcome run(const RunSpec& spec) {
    if (spec.argv.empty()) throw InfraError("sandbox: empty argv");
    std::vector<std::string> argv_store = spec.argv;
    std::vector<std::string> env_store = spec.env;
    const auto argv = c_strings(argv_store);
    const auto envp = c_strings(env_store);

    const bool drop_root = spec.drop_privileges && ::geteuid() == 0;
    if (drop_root) {
        if (::chown(spec.workdir.c_str(), kNobodyId, kNobodyId) != 0) {
            throw InfraError(errno_text("chown " + spec.workdir.string(), errno));
        }
    }

    const int in_fd = open_or_throw(spec.stdin_path.empty() ? "/dev/null" : spec.stdin_path, O_RDONLY);
    const int out_fd = open_or_throw(spec.stdout_path, O_WRONLY | O_CREAT | O_TRUNC);
    const int err_fd = open_or_throw(spec.stderr_path.empty() ? "/dev/null" : spec.stderr_path,
                                     spec.stderr_path.empty() ? O_WRONLY : O_WRONLY | O_CREAT | O_TRUNC);
    int report[2];
    if (::pipe2(report, O_CLOEXEC) != 0) throw InfraError(errno_text("pipe", errno));

    const auto start = Clock::now();
    const pid_t pid = ::fork();
    if (pid < 0) {
        const int err = errno;
        for (const int fd : {in_fd, out_fd, err_fd, report[0], report[1]}) ::close(fd);
        throw InfraError(errno_text("fork", err));
    }
    if (pid == 0) {
        ::close(report[0]);
        exec_child(spec, in_fd, out_fd, err_fd, report[1], argv.data(), envp.data(), drop_root);
    }
    for (const int fd : {in_fd, out_fd, err_fd, report[1]}) ::close(fd);

    // Blocks until exec succeeds (EOF) or the child reports a setup failure.
    int payload[2] = {0, 0};
    const auto got = ::read(report[0], payload, sizeof payload);
    ::close(report[0]);
    if (got == static_cast<ssize_t>(sizeof payload)) {
        ::waitpid(pid, nullptr, 0);
        static constexpr const char* kSteps[] = {"", "redirect", "setrlimit", "chdir", "drop privileges", "execve"};
        const int step = payload[0] >= 1 && payload[0] <= 5 ? payload[0] : 0;
        throw InfraError(errno_text(std::string("sandbox child ") + kSteps[step] + " (" + spec.argv[0] + ")", payload[1]));
    }

    RunOutcome outcome;
    const auto deadline = start + std::chrono::milliseconds(spec.limits.time_ms);
    const int pidfd = pidfd_open(pid);
    bool done = false;
    while (!done) {
        const auto now = Clock::now();
        if (now >= deadline) {
            ::kill(-pid, SIGKILL);
            ::kill(pid, SIGKILL);
            outcome.timed_out = true;
            break;
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count() + 1;
        if (pidfd >= 0) {
            pollfd pfd{pidfd, POLLIN, 0};
            const int rc = ::poll(&pfd, 1, static_cast<int>(left));
            if (rc > 0) done = true;
        } else {
            int status = 0;
            if (::waitpid(pid, &status, WNOHANG | WNOWAIT) == pid) {
                done = true;
            } else {
                std::this_thread::sleep_for(std::chrono::milliseconds(std::min<long long>(left, 2)));
            }
        }
    }
    int status = 0;
    rusage usage{};
    while (::wait4(pid, &status, 0, &usage) < 0 && errno == EINTR) {
    }
    const auto end = Clock::now();
    if (pidfd >= 0) ::close(pidfd);
    // Reap anything the program left behind in its group.
    ::kill(-pid, SIGKILL);

    outcome.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(end - start).count();
    outcome.peak_kib = usage.ru_maxrss;
    if (WIFEXITED(status)) {
        outcome.exited = true;
        outcome.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        outcome.term_signal = WTERMSIG(status);
    }
    return outcome;
}

ScratchDir::ScratchDir(const std::filesystem::path& parent, const std::string& prefix) {
    std::string templ = (parent / (prefix + "XXXXXX")).string();
    if (::mkdtemp(templ.data()) == nullptr) throw InfraError(errno_text("mkdtemp " + templ, errno));
    path_ = templ;
}

ScratchDir::~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

ChildProcess::ChildProcess(const std::string& command) {
    ignore_sigpipe_once();
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw InfraError(errno_text("pipe", errno));
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
        const int err = errno;
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw InfraError(errno_text("pipe", err));
    }
    std::string sh = "/bin/sh";
    std::string dash_c = "-c";
    std::string cmd = command;
    char* const argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
    const pid_t pid = ::fork();
    if (pid < 0) {
        const int err = errno;
        for (const int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
        throw InfraError(errno_text("fork", err));
    }
    if (pid == 0) {
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::signal(SIGPIPE, SIG_DFL);
        ::execv(argv[0], argv);
        ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    ::fcntl(to_child_, F_SETFL, ::fcntl(to_child_, F_GETFL) | O_NONBLOCK);
    ::fcntl(from_child_, F_SETFL, ::fcntl(from_child_, F_GETFL) | O_NONBLOCK);
}

ChildProcess::~ChildProcess() {
    if (to_child_ >= 0) ::close(to_child_);
    if (from_child_ >= 0) ::close(from_child_);
    if (!status_ && pid_ > 0) {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, nullptr, 0);
    }
}

namespace {

int millis_until(Clock::time_point deadline) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    return left <= 0 ? 0 : static_cast<int>(std::min<long long>(left, 1 << 30));
}

}  // namespace

void ChildProcess::write_all(std::string_view data, Clock::time_point deadline) {
    if (to_child_ < 0) throw InfraError("generator stdin already closed");
    while (!data.empty()) {
        const auto n = ::write(to_child_, data.data(), data.size());
        if (n > 0) {
            data.remove_prefix(static_cast<std::size_t>(n));
            continue;
        }
        if (n < 0 && errno != EAGAIN && errno != EINTR) throw InfraError(errno_text("write to generator", errno));
        const int wait_ms = millis_until(deadline);
        if (wait_ms == 0) throw InfraError("timed out writing to generator");
        pollfd pfd{to_child_, POLLOUT, 0};
        ::poll(&pfd, 1, wait_ms);
    }
}

std::optional<std::string> ChildProcess::read_line(Clock::time_point deadline) {
    for (;;) {
        if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        if (eof_) {
            if (buffer_.empty()) return std::nullopt;
            std::string line = std::move(buffer_);
            buffer_.clear();
            return line;
        }
        char chunk[4096];
        const auto n = ::read(from_child_, chunk, sizeof chunk);
        if (n > 0) {
            buffer_.append(chunk, static_cast<std::size_t>(n));
            continue;
        }
        if (n == 0) {
            eof_ = true;
            continue;
        }
        if (errno != EAGAIN && errno != EINTR) throw InfraError(errno_text("read from generator", errno));
        const int wait_ms = millis_until(deadline);
        if (wait_ms == 0) throw InfraError("timed out waiting for generator output");
        pollfd pfd{from_child_, POLLIN, 0};
        ::poll(&pfd, 1, wait_ms);
    }
}

void ChildProcess::close_stdin() {
    if (to_child_ >= 0) {
        ::close(to_child_);
        to_child_ = -1;
    }
}

int ChildProcess::wait(Clock::time_point deadline) {
    if (status_) return *status_;
    int status = 0;
    for (;;) {
        const pid_t r = ::waitpid(pid_, &status, WNOHANG);
        if (r == pid_) break;
        if (Clock::now() >= deadline) {
            ::kill(pid_, SIGKILL);
            ::waitpid(pid_, &status, 0);
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    status_ = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    return *status_;
}

void ChildProcess::kill() {
    if (!status_ && pid_ > 0) ::kill(pid_, SIGKILL);
}

}  // namespace minrepair::sandbox
