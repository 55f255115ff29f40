#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "minrepair/sandbox.hpp"
#include "minrepair/verdict.hpp"

namespace minrepair::generate {
struct Candidate;
}

namespace minrepair::judge {

struct TestCase {
    std::string input;
    std::string expected_output;
};

struct ProblemSpec {
    std::string problem_id;
    std::vector<TestCase> test_cases;
    std::int64_t time_limit_ms = 2000;
    std::int64_t memory_limit_kib = 262144;
};

struct TestResult {
    Verdict verdict = Verdict::AC;
    std::int64_t wall_ms = 0;
    std::int64_t peak_kib = 0;

    friend bool operator==(const TestResult&, const TestResult&) = default;
};

struct JudgeResult {
    Verdict verdict = Verdict::AC;
    // 1-based position of the first non-AC test.
    std::optional<std::size_t> first_failed_test;
    std::vector<TestResult> per_test;
};

// Loads problems/<id>/tests/<NN>.in + <NN>.out and optional limits.json
// {"time_ms", "memory_kib"}. Throws ConfigError on a missing or inconsistent layout.
ProblemSpec load_problem(const std::filesystem::path& problems_root, const std::string& problem_id);
std::map<std::string, ProblemSpec> load_problems(const std::filesystem::path& problems_root);

// CRLF -> LF, then one trailing newline stripped from each side, then byte compare.
bool outputs_match(std::string_view actual, std::string_view expected);

struct JudgeOptions {
    std::string python = "/usr/bin/python3";
    std::filesystem::path scratch_root = std::filesystem::temp_directory_path();
    bool isolate_network = true;
    bool drop_privileges = true;
    // Stop at the first non-AC test; per_test then lists only executed tests.
    bool stop_on_failure = true;
    std::int64_t compile_time_ms = 10000;
};

// Judges Python 3 programs in isolated child processes.
class Judge {
public:
    explicit Judge(JudgeOptions options = {});

    // True iff the source parses and byte-compiles, without running it.
    // Throws InfraError if the check itself could not run.
    bool check_compilable(std::string_view source) const;

    JudgeResult judge(std::string_view source, const ProblemSpec& problem) const;

    const JudgeOptions& options() const noexcept { return options_; }

private:
    JudgeOptions options_;
};

// Results keyed by (problem_id, sha256(source)). Safe for concurrent use.
class JudgeCache {
public:
    std::optional<JudgeResult> find(const std::string& problem_id, std::string_view source) const;
    void store(const std::string& problem_id, std::string_view source, const JudgeResult& result);
    std::size_t size() const;

private:
    static std::string key(const std::string& problem_id, std::string_view source);
    mutable std::mutex mutex_;
    std::map<std::string, JudgeResult> entries_;
};

struct BatchEntry {
    std::size_t candidate_index = 0;
    std::optional<JudgeResult> result;
    std::string error;  // set instead of result (unknown problem, infra failure)
};

struct BatchStats {
    std::size_t executions = 0;
    std::size_t cache_hits = 0;
};

// Judges every candidate; identical (problem, source) pairs execute once.
// Output order follows the candidate order. jobs == 0 means one worker per CPU.
std::vector<BatchEntry> judge_batch(const Judge& judge, std::span<const generate::Candidate> candidates,
                                    const std::map<std::string, std::string>& problem_of_pair,
                                    const std::map<std::string, ProblemSpec>& problems, std::size_t jobs,
                                    JudgeCache* cache = nullptr, BatchStats* stats = nullptr);

// Verdicts file: {"pair_id","sample_index","verdict","first_failed_test","wall_ms","peak_kib"} per line.
struct VerdictRecord {
    std::string pair_id;
    std::int64_t sample_index = 0;
    Verdict verdict = Verdict::AC;
    std::optional<std::size_t> first_failed_test;
    std::int64_t wall_ms = 0;
    std::int64_t peak_kib = 0;
};

VerdictRecord to_record(const std::string& pair_id, std::int64_t sample_index, const JudgeResult& result);
void write_verdicts(std::ostream& out, std::span<const VerdictRecord> records);
std::vector<VerdictRecord> read_verdicts(std::istream& in);

}  // namespace minrepair::judge
