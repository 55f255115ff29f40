#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace minrepair::sandbox {

struct Limits {
    std::int64_t time_ms = 2000;
    std::int64_t memory_kib = 262144;
    std::int64_t output_bytes = 64LL << 20;
};

struct RunSpec {
    std::vector<std::string> argv;  // argv[0] must be an absolute path
    std::vector<std::string> env;   // "KEY=value"
    std::filesystem::path workdir;
    std::filesystem::path stdin_path;  // empty: /dev/null
    std::filesystem::path stdout_path;
    std::filesystem::path stderr_path;  // empty: /dev/null
    Limits limits;
    // Best effort: a private network namespace with no interfaces.
    bool isolate_network = true;
    // When running as root, switch the child to nobody:nogroup.
    bool drop_privileges = true;
};

struct RunOutcome {
    bool exited = false;   // normal exit; exit_code is valid
    int exit_code = 0;
    int term_signal = 0;   // nonzero when killed by a signal
    bool timed_out = false;  // wall-clock limit hit and the child was killed
    std::int64_t wall_ms = 0;
    std::int64_t peak_kib = 0;
};

// Runs one process under the limits and waits for it. Throws InfraError when
// the process cannot be started (fork/exec/setup failure).
RunOutcome run(const RunSpec& spec);

// Unprivileged uid/gid used when dropping root.
inline constexpr unsigned kNobodyId = 65534;

// A private directory removed recursively on destruction.
class ScratchDir {
public:
    explicit ScratchDir(const std::filesystem::path& parent = std::filesystem::temp_directory_path(),
                        const std::string& prefix = "minrepair-");
    ~ScratchDir();
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

// A child speaking over its stdin/stdout pipes; stderr is inherited.
class ChildProcess {
public:
    // Runs `/bin/sh -c command`.
    explicit ChildProcess(const std::string& command);
    ~ChildProcess();
    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;

    using Clock = std::chrono::steady_clock;

    // Throws InfraError on timeout or a closed pipe.
    void write_all(std::string_view data, Clock::time_point deadline);
    // One line without its '\n'; nullopt at EOF. Throws InfraError on timeout.
    std::optional<std::string> read_line(Clock::time_point deadline);
    void close_stdin();
    // Exit status (or 128 + signal). Kills the child if the deadline passes.
    int wait(Clock::time_point deadline);
    void kill();

private:
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
    bool eof_ = false;
    std::optional<int> status_;
};

}  // namespace minrepair::sandbox
