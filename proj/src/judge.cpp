#include "minrepair/judge.hpp"

#include <sys/stat.h>

#include <algorithm>
#include <csignal>
#include <atomic>
#include <fstream>
#include <thread>

#include "minrepair/error.hpp"
#include "minrepair/generate.hpp"
#include "minrepair/util.hpp"

namespace minrepair::judge {

namespace fs = std::filesystem;

namespace {

// Exit codes reserved by the launchers below. The runner also exits 121 when
// its guard denies an operation, which classifies as RE.
constexpr int kSyntaxErrorExit = 3;
constexpr int kMemoryErrorExit = 122;

// Byte-compiles argv[1] without executing it.
constexpr const char* kCompileCheck = R"py(
import sys
try:
    with open(sys.argv[1], 'rb') as f:
        src = f.read()
    compile(src, 'solution.py', 'exec', dont_inherit=True)
except (SyntaxError, ValueError, RecursionError, MemoryError, OverflowError):
    sys.exit(3)
)py";

// Runs argv[1] as __main__ behind an audit hook that kills the process on
// network use, process creation, native code loading, or any filesystem
// mutation outside the working directory.
constexpr const char* kRunner = R"py(
import os, sys
_root = os.path.realpath(os.getcwd())
_exit, _write, _fsdecode, _realpath, _sep = os._exit, os.write, os.fsdecode, os.path.realpath, os.sep
_WRITE_FLAGS = os.O_WRONLY | os.O_RDWR | os.O_CREAT | os.O_APPEND | os.O_TRUNC
_BLOCKED_PREFIXES = ('socket.', 'subprocess.', 'os.exec', 'os.posix_spawn', 'os.spawn', 'os.fork', 'pty.', 'ctypes.', 'os.kill', 'os.killpg', 'os.system', 'os.startfile', 'mmap.', 'sys._debugmallocstats')
_PATH_EVENTS = {'os.remove': (0,), 'os.rename': (0, 1), 'os.mkdir': (0,), 'os.rmdir': (0,), 'os.chmod': (0,), 'os.chown': (0,), 'os.link': (0, 1), 'os.symlink': (0, 1), 'os.truncate': (0,), 'os.utime': (0,), 'os.chdir': (0,), 'os.chroot': (0,), 'os.mkfifo': (0,), 'os.mknod': (0,)}

def _deny(what):
    _write(2, ('sandbox: denied ' + what + '\n').encode('utf-8', 'replace'))
    _exit(121)

def _inside(path):
    if isinstance(path, int):
        return True
    try:
        p = _fsdecode(path)
    except Exception:
        return False
    rp = _realpath(p)
    return rp == _root or rp.startswith(_root + _sep)

def _hook(event, args):
    if event == 'open':
        path, mode, flags = args
        writing = (isinstance(mode, str) and any(c in mode for c in 'wax+')) or (isinstance(flags, int) and flags != -1 and flags & _WRITE_FLAGS)
        if writing and path is not None and not _inside(path):
            _deny('write to ' + repr(path))
    elif event in _PATH_EVENTS:
        for i in _PATH_EVENTS[event]:
            if i < len(args) and args[i] is not None and not _inside(args[i]):
                _deny(event + ' ' + repr(args[i]))
    elif event.startswith(_BLOCKED_PREFIXES):
        _deny(event)

with open(sys.argv[1], 'rb') as _f:
    _code = compile(_f.read(), 'solution.py', 'exec', dont_inherit=True)
sys.argv = ['solution.py']
_globals = {'__name__': '__main__', '__builtins__': __builtins__}
sys.addaudithook(_hook)
try:
    exec(_code, _globals)
except MemoryError:
    _exit(122)
)py";

std::vector<std::string> child_env(const fs::path& workdir) {
    return {"PATH=/usr/local/bin:/usr/bin:/bin", "LANG=C.UTF-8", "LC_ALL=C.UTF-8", "PYTHONHASHSEED=0",
            "PYTHONDONTWRITEBYTECODE=1", "PYTHONIOENCODING=utf-8", "HOME=" + workdir.string()};
}

std::string strip_one_newline(std::string s) {
    if (!s.empty() && s.back() == '\n') s.pop_back();
    return s;
}

std::string crlf_to_lf(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\r' && i + 1 < s.size() && s[i + 1] == '\n') continue;
        out.push_back(s[i]);
    }
    return out;
}

// A per-run box: <box>/work is the program's only writable directory; the
// harness keeps stdin/stdout/stderr files next to it where the program
// cannot reach them by path.
struct Box {
    explicit Box(const fs::path& root) : dir(root, "minrepair-box-") {
        ::chmod(dir.path().c_str(), 0711);
        fs::create_directory(work());
    }
    fs::path work() const { return dir.path() / "work"; }
    fs::path file(const char* name) const { return dir.path() / name; }

    sandbox::ScratchDir dir;
};

std::int64_t numeric_or_max(const std::string& stem) {
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        return -1;
    }
    return std::stoll(stem);
}

}  // namespace

bool outputs_match(std::string_view actual, std::string_view expected) {
    return strip_one_newline(crlf_to_lf(actual)) == strip_one_newline(crlf_to_lf(expected));
}

ProblemSpec load_problem(const fs::path& problems_root, const std::string& problem_id) {
    const fs::path dir = problems_root / problem_id;
    const fs::path tests = dir / "tests";
    if (!fs::is_directory(tests)) throw ConfigError("problem " + problem_id + ": missing " + tests.string());

    std::vector<fs::path> inputs;
    for (const auto& entry : fs::directory_iterator(tests)) {
        if (entry.path().extension() == ".in") inputs.push_back(entry.path());
    }
    if (inputs.empty()) throw ConfigError("problem " + problem_id + ": no test cases in " + tests.string());
    std::sort(inputs.begin(), inputs.end(), [](const fs::path& a, const fs::path& b) {
        const auto na = numeric_or_max(a.stem().string());
        const auto nb = numeric_or_max(b.stem().string());
        if (na != nb) return na < nb;
        return a.stem().string() < b.stem().string();
    });

    ProblemSpec spec;
    spec.problem_id = problem_id;
    for (const auto& in : inputs) {
        fs::path out = in;
        out.replace_extension(".out");
        if (!fs::exists(out)) throw ConfigError("problem " + problem_id + ": missing expected output " + out.string());
        spec.test_cases.push_back({read_file(in), read_file(out)});
    }
    const fs::path limits = dir / "limits.json";
    if (fs::exists(limits)) {
        json j;
        try {
            j = json::parse(read_file(limits));
        } catch (const json::parse_error& e) {
            throw ConfigError("problem " + problem_id + ": invalid limits.json: " + e.what());
        }
        if (j.contains("time_ms")) spec.time_limit_ms = j["time_ms"].get<std::int64_t>();
        if (j.contains("memory_kib")) spec.memory_limit_kib = j["memory_kib"].get<std::int64_t>();
    }
    if (spec.time_limit_ms <= 0 || spec.memory_limit_kib <= 0) {
        throw ConfigError("problem " + problem_id + ": limits must be positive");
    }
    return spec;
}

std::map<std::string, ProblemSpec> load_problems(const fs::path& problems_root) {
    if (!fs::is_directory(problems_root)) throw ConfigError("problems directory not found: " + problems_root.string());
    std::map<std::string, ProblemSpec> problems;
    for (const auto& entry : fs::directory_iterator(problems_root)) {
        if (!entry.is_directory()) continue;
        const std::string id = entry.path().filename().string();
        problems.emplace(id, load_problem(problems_root, id));
    }
    return problems;
}

Judge::Judge(JudgeOptions options) : options_(std::move(options)) {}

bool Judge::check_compilable(std::string_view source) const {
    Box box(options_.scratch_root);
    write_file(box.work() / "solution.py", source);

    sandbox::RunSpec spec;
    spec.argv = {options_.python, "-I", "-S", "-B", "-c", kCompileCheck, "solution.py"};
    spec.env = child_env(box.work());
    spec.workdir = box.work();
    spec.stdout_path = box.file("stdout");
    spec.stderr_path = box.file("stderr");
    spec.limits.time_ms = options_.compile_time_ms;
    spec.limits.memory_kib = 1 << 20;
    spec.isolate_network = options_.isolate_network;
    spec.drop_privileges = options_.drop_privileges;
    const auto out = sandbox::run(spec);
    if (out.exited && out.exit_code == 0) return true;
    if (out.exited && out.exit_code == kSyntaxErrorExit) return false;
    std::string detail = read_file(box.file("stderr"));
    if (detail.size() > 500) detail.resize(500);
    throw InfraError("syntax check did not complete (exit " + std::to_string(out.exit_code) + ", signal " +
                     std::to_string(out.term_signal) + (out.timed_out ? ", timed out" : "") + "): " + detail);
}

JudgeResult Judge::judge(std::string_view source, const ProblemSpec& problem) const {
    if (problem.test_cases.empty()) throw ConfigError("problem " + problem.problem_id + " has no test cases");
    JudgeResult result;
    if (!check_compilable(source)) {
        result.verdict = Verdict::CE;
        return result;
    }
    for (std::size_t t = 0; t < problem.test_cases.size(); ++t) {
        const TestCase& tc = problem.test_cases[t];
        Box box(options_.scratch_root);
        write_file(box.work() / "solution.py", source);
        write_file(box.file("stdin"), tc.input);

        sandbox::RunSpec spec;
        spec.argv = {options_.python, "-I", "-S", "-B", "-c", kRunner, "solution.py"};
        spec.env = child_env(box.work());
        spec.workdir = box.work();
        spec.stdin_path = box.file("stdin");
        spec.stdout_path = box.file("stdout");
        spec.stderr_path = box.file("stderr");
        spec.limits.time_ms = problem.time_limit_ms;
        spec.limits.memory_kib = problem.memory_limit_kib;
        spec.isolate_network = options_.isolate_network;
        spec.drop_privileges = options_.drop_privileges;
        const auto out = sandbox::run(spec);

        TestResult tr;
        tr.wall_ms = out.wall_ms;
        tr.peak_kib = out.peak_kib;
        if (out.timed_out || out.term_signal == SIGXCPU) {
            tr.verdict = Verdict::TLE;
        } else if (out.exited && out.exit_code == kMemoryErrorExit) {
            tr.verdict = Verdict::MLE;
        } else if (!out.exited && out.peak_kib >= problem.memory_limit_kib) {
            tr.verdict = Verdict::MLE;
        } else if (!out.exited || out.exit_code != 0) {
            tr.verdict = Verdict::RE;
        } else {
            tr.verdict = outputs_match(read_file(box.file("stdout")), tc.expected_output) ? Verdict::AC : Verdict::WA;
        }
        result.per_test.push_back(tr);
        if (tr.verdict != Verdict::AC && !result.first_failed_test) {
            result.first_failed_test = t + 1;
            result.verdict = tr.verdict;
            if (options_.stop_on_failure) break;
        }
    }
    return result;
}

std::string JudgeCache::key(const std::string& problem_id, std::string_view source) {
    return problem_id + '\n' + sha256_hex(source);
}

std::optional<JudgeResult> JudgeCache::find(const std::string& problem_id, std::string_view source) const {
    std::lock_guard lock(mutex_);
    const auto it = entries_.find(key(problem_id, source));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void JudgeCache::store(const std::string& problem_id, std::string_view source, const JudgeResult& result) {
    std::lock_guard lock(mutex_);
    entries_[key(problem_id, source)] = result;
}

std::size_t JudgeCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

std::vector<BatchEntry> judge_batch(const Judge& judge, std::span<const generate::Candidate> candidates,
                                    const std::map<std::string, std::string>& problem_of_pair,
                                    const std::map<std::string, ProblemSpec>& problems, std::size_t jobs,
                                    JudgeCache* cache, BatchStats* stats) {
    std::vector<BatchEntry> entries(candidates.size());

    // Group candidates by (problem, source) so each distinct program runs once.
    struct Job {
        const ProblemSpec* problem = nullptr;
        std::string_view source;
        std::vector<std::size_t> members;
        std::optional<JudgeResult> result;
        std::string error;
    };
    std::vector<Job> work;
    std::map<std::pair<std::string, std::string_view>, std::size_t> index;
    BatchStats local;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        entries[i].candidate_index = i;
        const auto pit = problem_of_pair.find(c.pair_id);
        if (pit == problem_of_pair.end()) {
            entries[i].error = "unknown pair_id " + c.pair_id;
            continue;
        }
        const auto prob = problems.find(pit->second);
        if (prob == problems.end()) {
            entries[i].error = "unknown problem_id " + pit->second;
            continue;
        }
        const auto [it, inserted] = index.try_emplace({pit->second, c.source}, work.size());
        if (inserted) {
            Job job;
            job.problem = &prob->second;
            job.source = c.source;
            if (cache) {
                job.result = cache->find(pit->second, c.source);
                if (job.result) ++local.cache_hits;
            }
            work.push_back(std::move(job));
        } else {
            ++local.cache_hits;
        }
        work[it->second].members.push_back(i);
    }

    std::vector<std::size_t> pending;
    for (std::size_t j = 0; j < work.size(); ++j) {
        if (!work[j].result) pending.push_back(j);
    }
    local.executions = pending.size();

    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min(jobs, std::max<std::size_t>(pending.size(), 1));
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t k = next++; k < pending.size(); k = next++) {
            Job& job = work[pending[k]];
            try {
                job.result = judge.judge(job.source, *job.problem);
                if (cache) cache->store(job.problem->problem_id, job.source, *job.result);
            } catch (const std::exception& e) {
                job.error = e.what();
            }
        }
    };
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < jobs; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();

    for (const Job& job : work) {
        for (const std::size_t i : job.members) {
            entries[i].result = job.result;
            entries[i].error = job.error;
        }
    }
    if (stats) *stats = local;
    return entries;
}

VerdictRecord to_record(const std::string& pair_id, std::int64_t sample_index, const JudgeResult& result) {
    VerdictRecord r;
    r.pair_id = pair_id;
    r.sample_index = sample_index;
    r.verdict = result.verdict;
    r.first_failed_test = result.first_failed_test;
    for (const auto& t : result.per_test) {
        r.wall_ms = std::max(r.wall_ms, t.wall_ms);
        r.peak_kib = std::max(r.peak_kib, t.peak_kib);
    }
    return r;
}

void write_verdicts(std::ostream& out, std::span<const VerdictRecord> records) {
    for (const auto& r : records) {
        ordered_json j;
        j["pair_id"] = r.pair_id;
        j["sample_index"] = r.sample_index;
        j["verdict"] = std::string(to_string(r.verdict));
        j["first_failed_test"] = r.first_failed_test ? json(*r.first_failed_test) : json(nullptr);
        j["wall_ms"] = r.wall_ms;
        j["peak_kib"] = r.peak_kib;
        out << j.dump() << '\n';
    }
}

std::vector<VerdictRecord> read_verdicts(std::istream& in) {
    std::vector<VerdictRecord> records;
    for_each_jsonl(in, [&](std::size_t line, const json& obj) {
        VerdictRecord r;
        r.pair_id = require_string(obj, "pair_id", line);
        r.sample_index = require_int(obj, "sample_index", line);
        const std::string v = require_string(obj, "verdict", line);
        const auto verdict = parse_verdict(v);
        if (!verdict) throw IngestError(line, "unknown verdict '" + v + "'");
        r.verdict = *verdict;
        if (const auto it = obj.find("first_failed_test"); it != obj.end() && !it->is_null()) {
            if (!it->is_number_unsigned()) throw IngestError(line, "first_failed_test must be a positive integer");
            r.first_failed_test = it->get<std::size_t>();
        }
        r.wall_ms = require_int(obj, "wall_ms", line);
        r.peak_kib = require_int(obj, "peak_kib", line);
        records.push_back(std::move(r));
    });
    return records;
}

}  // namespace minrepair::judge
