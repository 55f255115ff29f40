#include "minrepair/judge.hpp"

#include <sstream>

#include "gtest/gtest.h"
#include "minrepair/error.hpp"
#include "minrepair/generate.hpp"
#include "minrepair/sandbox.hpp"
#include "minrepair/util.hpp"
#include "support/oracles.hpp"

namespace minrepair::judge {
namespace {

namespace fs = std::filesystem;

std::string fixture(const std::string& name) { return read_file(oracle::data_dir() / "judge" / name); }

class JudgeFixtures : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        JudgeOptions options;
        options.python = oracle::python();
        judge_ = new Judge(options);
        echo_ = new ProblemSpec(load_problem(oracle::data_dir() / "problems", "echo"));
    }
    static void TearDownTestSuite() {
        delete judge_;
        delete echo_;
    }
    static Judge* judge_;
    static ProblemSpec* echo_;
};

Judge* JudgeFixtures::judge_ = nullptr;
ProblemSpec* JudgeFixtures::echo_ = nullptr;

TEST_F(JudgeFixtures, LoadsTestsInNumericOrderWithLimits) {
    EXPECT_EQ(echo_->problem_id, "echo");
    ASSERT_EQ(echo_->test_cases.size(), 3u);
    EXPECT_EQ(echo_->test_cases[1].input, "2\n");
    EXPECT_EQ(echo_->time_limit_ms, 500);
    EXPECT_EQ(echo_->memory_limit_kib, 262144);
}

TEST_F(JudgeFixtures, Accepted) {
    const auto r = judge_->judge(fixture("ac.py"), *echo_);
    EXPECT_EQ(r.verdict, Verdict::AC);
    EXPECT_FALSE(r.first_failed_test);
    EXPECT_EQ(r.per_test.size(), 3u);
}

TEST_F(JudgeFixtures, WrongAnswerNamesFirstFailedTest) {
    const auto r = judge_->judge(fixture("wa.py"), *echo_);
    EXPECT_EQ(r.verdict, Verdict::WA);
    EXPECT_EQ(r.first_failed_test, 2u);
    EXPECT_EQ(r.per_test.size(), 2u);  // stops at the failure
}

TEST_F(JudgeFixtures, RuntimeError) {
    const auto r = judge_->judge(fixture("re.py"), *echo_);
    EXPECT_EQ(r.verdict, Verdict::RE);
    EXPECT_EQ(r.first_failed_test, 1u);
}

TEST_F(JudgeFixtures, TimeLimitExceeded) {
    const auto r = judge_->judge(fixture("tle.py"), *echo_);
    EXPECT_EQ(r.verdict, Verdict::TLE);
    EXPECT_EQ(r.first_failed_test, 1u);
    EXPECT_GE(r.per_test[0].wall_ms, 400);
    EXPECT_LT(r.per_test[0].wall_ms, 3000);
}

TEST_F(JudgeFixtures, CompileError) {
    EXPECT_FALSE(judge_->check_compilable(fixture("ce.py")));
    EXPECT_TRUE(judge_->check_compilable(fixture("ac.py")));
    const auto r = judge_->judge(fixture("ce.py"), *echo_);
    EXPECT_EQ(r.verdict, Verdict::CE);
    EXPECT_FALSE(r.first_failed_test);
    EXPECT_TRUE(r.per_test.empty());
}

TEST_F(JudgeFixtures, CompileCheckDoesNotRunTheProgram) {
    // Top-level code with side effects must not execute during the check.
    EXPECT_TRUE(judge_->check_compilable("import time\ntime.sleep(30)\n"));
    EXPECT_FALSE(judge_->check_compilable("x = 1\n  y = 2\n"));
    EXPECT_FALSE(judge_->check_compilable("print('\\x00'\n"));
}

TEST_F(JudgeFixtures, MemoryLimitExceeded) {
    const auto r = judge_->judge(fixture("mle.py"), *echo_);
    EXPECT_EQ(r.verdict, Verdict::MLE);
}

TEST_F(JudgeFixtures, HostileProgramIsRuntimeErrorAndLeavesNoTrace) {
    fs::remove("/tmp/minrepair-escape");
    const auto r = judge_->judge(fixture("hostile.py"), *echo_);
    EXPECT_EQ(r.verdict, Verdict::RE);
    EXPECT_FALSE(fs::exists("/tmp/minrepair-escape"));

    const auto r2 = judge_->judge(fixture("hostile_file.py"), *echo_);
    EXPECT_EQ(r2.verdict, Verdict::RE);
    EXPECT_FALSE(fs::exists(fs::temp_directory_path() / "minrepair-escape"));

    // The harness still judges normally afterwards.
    EXPECT_EQ(judge_->judge(fixture("ac.py"), *echo_).verdict, Verdict::AC);
}

TEST_F(JudgeFixtures, WritesInsideWorkdirAreAllowed) {
    const auto r = judge_->judge("with open('scratch.txt', 'w') as f:\n    f.write('x')\nprint(input())\n", *echo_);
    EXPECT_EQ(r.verdict, Verdict::AC);
}

TEST_F(JudgeFixtures, SubprocessIsDenied) {
    const auto r = judge_->judge("import os\nos.system('true')\nprint(input())\n", *echo_);
    EXPECT_EQ(r.verdict, Verdict::RE);
}

TEST_F(JudgeFixtures, RunAllTestsWhenNotStopping) {
    JudgeOptions options;
    options.python = oracle::python();
    options.stop_on_failure = false;
    const Judge all(options);
    const auto r = all.judge(fixture("wa.py"), *echo_);
    EXPECT_EQ(r.verdict, Verdict::WA);
    EXPECT_EQ(r.first_failed_test, 2u);
    ASSERT_EQ(r.per_test.size(), 3u);
    EXPECT_EQ(r.per_test[2].verdict, Verdict::AC);
}

TEST(OutputsMatch, NormalizesLineEndingsAndOneTrailingNewline) {
    EXPECT_TRUE(outputs_match("1\n", "1\n"));
    EXPECT_TRUE(outputs_match("1", "1\n"));
    EXPECT_TRUE(outputs_match("1\r\n2\r\n", "1\n2\n"));
    EXPECT_FALSE(outputs_match("1\n\n", "1"));
    EXPECT_FALSE(outputs_match("1 \n", "1\n"));
    EXPECT_FALSE(outputs_match("", "1\n"));
}

TEST(LoadProblem, ErrorsAreConfigErrors) {
    EXPECT_THROW(load_problem(oracle::data_dir() / "problems", "nope"), ConfigError);
    sandbox::ScratchDir dir;
    fs::create_directories(dir.path() / "p" / "tests");
    write_file(dir.path() / "p" / "tests" / "1.in", "x");
    EXPECT_THROW(load_problem(dir.path(), "p"), ConfigError);  // missing .out
    write_file(dir.path() / "p" / "tests" / "1.out", "x");
    write_file(dir.path() / "p" / "limits.json", "{\"time_ms\": 0}");
    EXPECT_THROW(load_problem(dir.path(), "p"), ConfigError);
    write_file(dir.path() / "p" / "limits.json", "{\"time_ms\": 100}");
    EXPECT_EQ(load_problem(dir.path(), "p").time_limit_ms, 100);
}

TEST(LoadProblems, ReadsEveryProblem) {
    const auto problems = load_problems(oracle::data_dir() / "problems");
    EXPECT_EQ(problems.size(), 5u);
    EXPECT_EQ(problems.at("minmax").test_cases.size(), 3u);
}

TEST(JudgeBatch, RunsEachDistinctProgramOnce) {
    JudgeOptions options;
    options.python = oracle::python();
    const Judge judge(options);
    const std::map<std::string, ProblemSpec> problems{{"echo", load_problem(oracle::data_dir() / "problems", "echo")}};
    const std::map<std::string, std::string> problem_of{{"a", "echo"}, {"b", "echo"}, {"c", "missing"}};
    const std::string ac = fixture("ac.py");
    const std::string wa = fixture("wa.py");
    const std::vector<generate::Candidate> cands{
        {"a", 0, ac, "g"}, {"a", 1, wa, "g"}, {"b", 0, ac, "g"}, {"a", 2, ac, "g"}, {"c", 0, ac, "g"}, {"z", 0, ac, "g"},
    };
    JudgeCache cache;
    BatchStats stats;
    const auto entries = judge_batch(judge, cands, problem_of, problems, 2, &cache, &stats);
    ASSERT_EQ(entries.size(), cands.size());
    EXPECT_EQ(stats.executions, 2u);
    EXPECT_EQ(stats.cache_hits, 2u);
    EXPECT_EQ(entries[0].result->verdict, Verdict::AC);
    EXPECT_EQ(entries[1].result->verdict, Verdict::WA);
    EXPECT_EQ(entries[2].result->verdict, Verdict::AC);
    EXPECT_EQ(entries[3].result->verdict, Verdict::AC);
    EXPECT_FALSE(entries[4].result);
    EXPECT_NE(entries[4].error.find("missing"), std::string::npos);
    EXPECT_FALSE(entries[5].result);
    EXPECT_EQ(cache.size(), 2u);

    // A second batch is served from the cache.
    BatchStats again;
    judge_batch(judge, std::span(cands).first(2), problem_of, problems, 1, &cache, &again);
    EXPECT_EQ(again.executions, 0u);
    EXPECT_EQ(again.cache_hits, 2u);
}

TEST(VerdictsFile, RoundTrip) {
    JudgeResult r;
    r.verdict = Verdict::WA;
    r.first_failed_test = 2;
    r.per_test = {{Verdict::AC, 30, 9000}, {Verdict::WA, 45, 8000}};
    const auto rec = to_record("p", 3, r);
    EXPECT_EQ(rec.wall_ms, 45);
    EXPECT_EQ(rec.peak_kib, 9000);
    JudgeResult ce;
    ce.verdict = Verdict::CE;
    const std::vector<VerdictRecord> records{rec, to_record("q", 0, ce)};
    std::stringstream buf;
    write_verdicts(buf, records);
    const auto back = read_verdicts(buf);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].first_failed_test, 2u);
    EXPECT_EQ(back[1].verdict, Verdict::CE);
    EXPECT_FALSE(back[1].first_failed_test);
    std::istringstream bad(R"({"pair_id":"p","sample_index":0,"verdict":"OK","wall_ms":0,"peak_kib":0})");
    EXPECT_THROW(read_verdicts(bad), IngestError);
}

}  // namespace
}  // namespace minrepair::judge
