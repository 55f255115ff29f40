#include "minrepair/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include "gtest/gtest.h"
#include "minrepair/corpus.hpp"
#include "minrepair/sandbox.hpp"
#include "minrepair/util.hpp"
#include "support/oracles.hpp"

namespace minrepair::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result cli(std::vector<std::string> args) {
    args.insert(args.begin(), "minrepair");
    std::ostringstream out, err;
    Result r;
    r.code = cli_dispatch(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string data(const std::string& rel) { return (oracle::data_dir() / rel).string(); }

class Cli : public ::testing::Test {
protected:
    std::string path(const std::string& name) const { return (dir_.path() / name).string(); }
    std::string problems() const { return data("problems"); }
    sandbox::ScratchDir dir_;
};

TEST(CliHelp, EverySubcommandExitsZero) {
    const std::vector<std::vector<std::string>> commands{
        {"--help"},
        {"corpus", "--help"},
        {"corpus", "pair", "--help"},
        {"corpus", "filter", "--help"},
        {"corpus", "dedupe", "--help"},
        {"corpus", "split", "--help"},
        {"corpus", "stats", "--help"},
        {"tokenizer", "train", "--help"},
        {"tokenizer", "encode", "--help"},
        {"generate", "--help"},
        {"judge", "run", "--help"},
        {"evaluate", "--help"},
        {"suggest", "--help"},
        {"report", "render", "--help"},
    };
    for (const auto& c : commands) {
        const auto r = cli(c);
        EXPECT_EQ(r.code, kExitOk) << c[0];
        EXPECT_NE(r.out.find("Usage"), std::string::npos) << c[0];
    }
}

TEST(CliUsage, UnknownFlagIsUsageErrorWithHelp) {
    const auto r = cli({"corpus", "stats", "--in", "x", "--bogus"});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("--bogus"), std::string::npos);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
    EXPECT_EQ(cli({}).code, kExitUsage);
    EXPECT_EQ(cli({"corpus", "stats"}).code, kExitUsage);  // missing --in
    EXPECT_EQ(cli({"nope"}).code, kExitUsage);
}

TEST_F(Cli, StatsOnEmptyPairsFile) {
    write_file(path("empty.jsonl"), "");
    const auto r = cli({"corpus", "stats", "--in", path("empty.jsonl")});
    EXPECT_EQ(r.code, kExitOk);
    const auto j = json::parse(r.out);
    EXPECT_EQ(j["count"], 0);
    EXPECT_TRUE(j["mean_ed"].is_null());
}

TEST_F(Cli, DomainErrorsExitOne) {
    EXPECT_EQ(cli({"corpus", "stats", "--in", path("missing.jsonl")}).code, kExitDomain);
    write_file(path("bad.jsonl"), "{\"pair_id\": 1}\n");
    const auto r = cli({"corpus", "stats", "--in", path("bad.jsonl")});
    EXPECT_EQ(r.code, kExitDomain);
    EXPECT_NE(r.err.find("line 1"), std::string::npos);
}

TEST_F(Cli, UnknownGeneratorIsUsageError) {
    EXPECT_EQ(cli({"generate", "--generator", "magic", "--pairs", data("mini/pairs.jsonl"), "--out", path("c")}).code,
              kExitUsage);
    EXPECT_EQ(cli({"generate", "--generator", "retrieval", "--pairs", data("mini/pairs.jsonl"), "--out", path("c")}).code,
              kExitUsage);
}

TEST_F(Cli, SuggestWithoutAcceptedCandidate) {
    write_file(path("wrong.py"), "print(\"Hello world\")\n");
    const auto r = cli({"suggest", "--wrong", path("wrong.py"), "--problem", "hello", "--generator", "copy",
                        "--problems", problems()});
    EXPECT_EQ(r.code, kExitDomain);
    EXPECT_NE(r.err.find("NoCorrectCandidate"), std::string::npos);
}

TEST_F(Cli, SuggestWithRetrievalAndFallback) {
    write_file(path("wrong.py"), "x = int(input())\nprint(x * x * 2)\n");
    auto r = cli({"suggest", "--wrong", path("wrong.py"), "--problem", "cube", "--generator", "retrieval", "--train",
                  data("mini/pairs.jsonl"), "--problems", problems(), "--out", path("s.json")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    auto j = json::parse(read_file(path("s.json")));
    EXPECT_EQ(j["source"], "x = int(input())\nprint(x ** 3)\n");
    EXPECT_EQ(j["edit_distance"], 4);
    EXPECT_EQ(oracle::apply_unified_diff(read_file(path("wrong.py")), j["diff"].get<std::string>()),
              j["source"].get<std::string>());
    EXPECT_TRUE(fs::exists(path("s.json.manifest.json")));

    r = cli({"suggest", "--wrong", path("wrong.py"), "--problem", "cube", "--generator", "copy", "--fallback",
             "retrieval", "--train", data("mini/pairs.jsonl"), "--problems", problems()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    j = json::parse(r.out);
    EXPECT_EQ(j["generator_id"], "retrieval");
}

TEST_F(Cli, ProblemsDirFromEnvironment) {
    write_file(path("wrong.py"), "print(\"Hello world\")\n");
    const std::vector<std::string> args{"suggest", "--wrong", path("wrong.py"), "--problem", "hello", "--generator",
                                        "retrieval", "--train", data("mini/pairs.jsonl")};
    ::unsetenv("MINREPAIR_PROBLEMS_DIR");
    EXPECT_EQ(cli(args).code, kExitUsage);
    ::setenv("MINREPAIR_PROBLEMS_DIR", problems().c_str(), 1);
    const auto r = cli(args);
    ::unsetenv("MINREPAIR_PROBLEMS_DIR");
    EXPECT_EQ(r.code, kExitOk) << r.err;
}

std::size_t line_count(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

TEST_F(Cli, ExternalGeneratorShortCountFailsThePair) {
    const std::string gen = "external:" + oracle::python() + " " + data("generators/stub_gen.py") + " short";
    std::ostringstream pairs;
    const std::vector<corpus::CodePair> list{corpus::make_pair("hello", "u", "print(1)\n", "print(2)\n"),
                                             corpus::make_pair("hello", "u", "SHORT\n", "print(2)\n"),
                                             corpus::make_pair("hello", "u", "print(3)\n", "print(2)\n")};
    corpus::write_pairs(pairs, list);
    write_file(path("pairs.jsonl"), pairs.str());
    const auto r = cli({"generate", "--generator", gen, "--pairs", path("pairs.jsonl"), "--n-samples", "2", "--out",
                        path("c.jsonl")});
    EXPECT_EQ(r.code, kExitDomain);
    EXPECT_NE(r.err.find(list[1].pair_id), std::string::npos);
    EXPECT_EQ(line_count(read_file(path("c.jsonl"))), 4u);

    const auto echo = cli({"generate", "--generator", "external:" + oracle::python() + " " + data("generators/stub_gen.py"),
                           "--pairs", path("pairs.jsonl"), "--n-samples", "2", "--out", path("e.jsonl")});
    EXPECT_EQ(echo.code, kExitOk) << echo.err;
    EXPECT_EQ(line_count(read_file(path("e.jsonl"))), 6u);
}

TEST_F(Cli, PipelineAndReplayReproduceReport) {
    const auto run = [&](std::vector<std::string> args) {
        const auto r = cli(args);
        EXPECT_EQ(r.code, kExitOk) << args[0] << ": " << r.err;
        return r;
    };
    run({"corpus", "pair", "--in", data("mini/submissions.jsonl"), "--out", path("pairs.jsonl")});
    run({"tokenizer", "train", "--in", path("pairs.jsonl"), "--vocab-size", "300", "--out", path("tok.json")});
    run({"corpus", "filter", "--in", path("pairs.jsonl"), "--tokenizer", path("tok.json"), "--out", path("f.jsonl")});
    run({"corpus", "dedupe", "--in", path("f.jsonl"), "--out", path("d.jsonl")});
    const auto split = run({"corpus", "split", "--in", path("d.jsonl"), "--out-dir", path("split"), "--seed", "7",
                            "--ratios", "0.6", "0.2", "0.2"});
    EXPECT_NE(split.err.find("seed: 7"), std::string::npos);
    for (const char* f : {"train.jsonl", "valid.jsonl", "test.jsonl", "split.json", "manifest.json"}) {
        EXPECT_TRUE(fs::exists(dir_.path() / "split" / f)) << f;
    }

    const std::vector<std::string> eval{"evaluate", "--pairs", path("split/test.jsonl"), "--generator", "mutate",
                                        "--n-samples", "5", "--seed", "7", "--tokenizer", path("tok.json"),
                                        "--problems", problems(), "--jobs", "2"};
    auto first = eval;
    first.insert(first.end(), {"--out-dir", path("ev1")});
    run(first);
    for (const char* f : {"report.json", "report.txt", "candidates.jsonl", "verdicts.jsonl", "grouped_pass.csv",
                          "scatter.csv", "manifest.json"}) {
        EXPECT_TRUE(fs::exists(dir_.path() / "ev1" / f)) << f;
    }
    auto second = eval;
    second.insert(second.end(), {"--out-dir", path("ev2")});
    run(second);
    EXPECT_EQ(read_file(path("ev1/report.json")), read_file(path("ev2/report.json")));
    EXPECT_EQ(read_file(path("ev1/verdicts.jsonl")).size() > 0, true);
    const auto m1 = json::parse(read_file(path("ev1/manifest.json")));
    const auto m2 = json::parse(read_file(path("ev2/manifest.json")));
    EXPECT_EQ(m1["config_hash"], m2["config_hash"]);
    EXPECT_EQ(m1["inputs"], m2["inputs"]);
    EXPECT_EQ(m1["outputs"][0]["sha256"], m2["outputs"][0]["sha256"]);

    run({"evaluate", "--pairs", path("split/test.jsonl"), "--generator", "replay:" + path("ev1/candidates.jsonl"),
         "--verdicts", path("ev1/verdicts.jsonl"), "--seed", "7", "--tokenizer", path("tok.json"), "--problems",
         problems(), "--out-dir", path("ev3")});
    EXPECT_EQ(read_file(path("ev3/report.json")), read_file(path("ev1/report.json")));

    // Regenerating from the replay file writes identical candidates.
    run({"generate", "--generator", "replay:" + path("ev1/candidates.jsonl"), "--pairs", path("split/test.jsonl"),
         "--out", path("replayed.jsonl")});
    EXPECT_EQ(read_file(path("replayed.jsonl")), read_file(path("ev1/candidates.jsonl")));

    // Standalone judging agrees with evaluate.
    run({"judge", "run", "--candidates", path("ev1/candidates.jsonl"), "--pairs", path("split/test.jsonl"),
         "--problems", problems(), "--out", path("v.jsonl")});
    const auto strip_timing = [](const std::string& text) {
        std::vector<std::string> out;
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            auto j = json::parse(line);
            j.erase("wall_ms");
            j.erase("peak_kib");
            out.push_back(j.dump());
        }
        std::sort(out.begin(), out.end());
        return out;
    };
    EXPECT_EQ(strip_timing(read_file(path("v.jsonl"))), strip_timing(read_file(path("ev1/verdicts.jsonl"))));

    const auto table = run({"report", "render", "--report", path("ev1/report.json"), "--report", path("ev3/report.json")});
    EXPECT_NE(table.out.find("mutate"), std::string::npos);
    EXPECT_EQ(std::count(table.out.begin(), table.out.end(), '\n'), 4);
}

}  // namespace
}  // namespace minrepair::cli
