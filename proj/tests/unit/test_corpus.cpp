#include "minrepair/corpus.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include "gtest/gtest.h"
#include "minrepair/error.hpp"
#include "support/oracles.hpp"

namespace minrepair::corpus {
namespace {

SubmissionRecord rec(std::string user, std::string problem, std::int64_t t, Verdict v, std::string src) {
    return {std::move(user), std::move(problem), t, v, std::move(src)};
}

TEST(Timestamp, ParsesOffsetsAndFractions) {
    EXPECT_EQ(parse_timestamp_ms("2024-03-01T10:00:00Z"), 1709287200000);
    EXPECT_EQ(parse_timestamp_ms("2024-03-01T10:00:00"), 1709287200000);
    EXPECT_EQ(parse_timestamp_ms("2024-03-01T12:30:00.250+02:00"), 1709289000250);
    EXPECT_EQ(parse_timestamp_ms("1970-01-01T00:00:00-00:30"), 1800000);
    EXPECT_EQ(parse_timestamp_ms("1970-01-01 00:00:01.5Z"), 1500);
    EXPECT_THROW(parse_timestamp_ms("2024-02-30T00:00:00Z"), Error);
    EXPECT_THROW(parse_timestamp_ms("yesterday"), Error);
    EXPECT_THROW(parse_timestamp_ms("2024-03-01T25:00:00Z"), Error);
    EXPECT_EQ(format_timestamp_ms(1709289000250), "2024-03-01T10:30:00.250Z");
}

TEST(PairId, LengthFramedContentHash) {
    // sha256("1:p1:a1:b")[:16]
    EXPECT_EQ(make_pair_id("p", "a", "b"), "c4229795ace7dee4");
    EXPECT_NE(make_pair_id("p", "ab", "c"), make_pair_id("p", "a", "bc"));
    const auto p = make_pair("p", "u", "kitten", "sitting");
    EXPECT_EQ(p.original_ed, 3u);
    EXPECT_EQ(p.pair_id, make_pair_id("p", "kitten", "sitting"));
}

TEST(PairSubmissions, NextStrictlyLaterAccepted) {
    const std::vector<SubmissionRecord> records{
        rec("u", "p", 30, Verdict::AC, "c1"),
        rec("u", "p", 10, Verdict::WA, "w1"),
        rec("u", "p", 20, Verdict::RE, "w2"),
        rec("u", "p", 40, Verdict::WA, "w3"),
        rec("u", "p", 50, Verdict::AC, "c2"),
        rec("u", "p", 60, Verdict::WA, "w4"),  // never fixed
        rec("v", "p", 5, Verdict::WA, "x"),    // other user, no AC
        rec("u", "q", 15, Verdict::WA, "y"),   // other problem, no AC
    };
    const auto pairs = pair_submissions(records);
    ASSERT_EQ(pairs.size(), 3u);
    EXPECT_EQ(pairs[0].wrong_source, "w1");
    EXPECT_EQ(pairs[0].correct_source, "c1");
    EXPECT_EQ(pairs[1].wrong_source, "w2");
    EXPECT_EQ(pairs[1].correct_source, "c1");
    EXPECT_EQ(pairs[2].wrong_source, "w3");
    EXPECT_EQ(pairs[2].correct_source, "c2");
}

TEST(PairSubmissions, EqualTimestampsDoNotPair) {
    const std::vector<SubmissionRecord> records{
        rec("u", "p", 10, Verdict::WA, "w"),
        rec("u", "p", 10, Verdict::AC, "c"),
        rec("u", "p", 11, Verdict::AC, "c2"),
    };
    const auto pairs = pair_submissions(records);
    ASSERT_EQ(pairs.size(), 1u);
    EXPECT_EQ(pairs[0].correct_source, "c2");
}

TEST(PairSubmissions, MatchesBruteForceOnRandomLogs) {
    std::mt19937_64 rng(99);
    const Verdict verdicts[] = {Verdict::AC, Verdict::WA, Verdict::RE, Verdict::TLE, Verdict::CE};
    for (int round = 0; round < 200; ++round) {
        std::vector<SubmissionRecord> records;
        const int n = static_cast<int>(rng() % 25);
        for (int i = 0; i < n; ++i) {
            records.push_back(rec("u" + std::to_string(rng() % 3), "p" + std::to_string(rng() % 2),
                                  static_cast<std::int64_t>(rng() % 12), verdicts[rng() % 5], "s" + std::to_string(i)));
        }
        std::multiset<std::tuple<std::string, std::string, std::string, std::string>> want;
        for (const auto& w : records) {
            if (w.verdict == Verdict::AC) continue;
            const SubmissionRecord* best = nullptr;
            for (const auto& c : records) {
                if (c.verdict != Verdict::AC || c.user_id != w.user_id || c.problem_id != w.problem_id) continue;
                if (c.submitted_at_ms <= w.submitted_at_ms) continue;
                if (best == nullptr || c.submitted_at_ms < best->submitted_at_ms) best = &c;
            }
            if (best != nullptr) want.emplace(w.user_id, w.problem_id, w.source, best->source);
        }
        std::multiset<std::tuple<std::string, std::string, std::string, std::string>> got;
        for (const auto& p : pair_submissions(records)) got.emplace(p.user_id, p.problem_id, p.wrong_source, p.correct_source);
        ASSERT_EQ(got, want) << "round " << round;
    }
}

TEST(ReadSubmissions, ValidatesRecords) {
    std::istringstream good(
        R"({"user_id":"u","problem_id":"p","submitted_at":"2024-01-01T00:00:00Z","verdict":"WA","source":"x"})"
        "\n");
    const auto records = read_submissions(good);
    ASSERT_EQ(records.size(), 1u);
    EXPECT_EQ(records[0].verdict, Verdict::WA);

    std::istringstream bad_verdict(
        R"({"user_id":"u","problem_id":"p","submitted_at":"2024-01-01T00:00:00Z","verdict":"WA","source":"x"})"
        "\n"
        R"({"user_id":"u","problem_id":"p","submitted_at":"2024-01-01T00:00:00Z","verdict":"OK","source":"x"})"
        "\n");
    try {
        read_submissions(bad_verdict);
        FAIL();
    } catch (const IngestError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    std::istringstream bad_utf8(
        "{\"user_id\":\"u\",\"problem_id\":\"p\",\"submitted_at\":\"2024-01-01T00:00:00Z\",\"verdict\":\"WA\","
        "\"source\":\"\\udc80\"}\n");
    EXPECT_THROW(read_submissions(bad_utf8), IngestError);
    std::istringstream missing(R"({"user_id":"u"})");
    EXPECT_THROW(read_submissions(missing), IngestError);
}

class CountingTokenizer : public tokenize::Tokenizer {
public:
    tokenize::TokenSeq encode(std::string_view text) const override {
        // One token per whitespace-separated word.
        tokenize::TokenSeq out;
        std::istringstream in{std::string(text)};
        std::string w;
        while (in >> w) out.push_back(0);
        return out;
    }
};

TEST(FilterPairs, BothSidesStrictlyInsideBounds) {
    const std::vector<CodePair> pairs{
        make_pair("p", "u", "a b", "a b c"),      // 2, 3 -> kept
        make_pair("p", "u", "", "a"),             // 0 -> dropped
        make_pair("p", "u", "a b c d", "a"),      // 4 == max -> dropped
        make_pair("p", "u", "a", "a b c d e"),    // 5 -> dropped
        make_pair("p", "u", "a b c", "a b c"),    // kept
    };
    const auto kept = filter_pairs(pairs, CountingTokenizer{}, 4);
    ASSERT_EQ(kept.size(), 2u);
    EXPECT_EQ(kept[0], pairs[0]);
    EXPECT_EQ(kept[1], pairs[4]);
}

TEST(DedupePairs, ExactTripleKeepsFirst) {
    const auto a = make_pair("p", "u1", "w", "c");
    const auto b = make_pair("p", "u2", "w", "c");  // same triple, other user
    const auto c = make_pair("q", "u1", "w", "c");  // other problem
    const auto d = make_pair("p", "u1", "w ", "c");
    const std::vector<CodePair> pairs{a, b, c, d, a};
    const auto out = dedupe_pairs(pairs);
    ASSERT_EQ(out.size(), 3u);
    EXPECT_EQ(out[0].user_id, "u1");
    EXPECT_EQ(out[1], c);
    EXPECT_EQ(out[2], d);
    EXPECT_EQ(dedupe_pairs(out), out);
}

std::vector<CodePair> numbered_pairs(int n) {
    std::vector<CodePair> pairs;
    for (int i = 0; i < n; ++i) pairs.push_back(make_pair("p", "u", "w" + std::to_string(i), "c"));
    return pairs;
}

TEST(SplitPairs, SizesAndPartition) {
    for (const int n : {3, 4, 10, 20, 21, 100, 257}) {
        const auto pairs = numbered_pairs(n);
        const auto split = split_pairs(pairs, 123);
        const auto expected_small = static_cast<std::size_t>(std::max<long long>(1, std::llround(n * 0.05)));
        EXPECT_EQ(split.valid.size(), expected_small) << n;
        EXPECT_EQ(split.test.size(), expected_small) << n;
        EXPECT_EQ(split.train.size() + split.valid.size() + split.test.size(), static_cast<std::size_t>(n));
        std::multiset<std::string> all;
        for (const auto* part : {&split.train, &split.valid, &split.test}) {
            for (const auto& p : *part) all.insert(p.pair_id);
        }
        std::multiset<std::string> want;
        for (const auto& p : pairs) want.insert(p.pair_id);
        EXPECT_EQ(all, want);
    }
}

TEST(SplitPairs, DeterministicPerSeed) {
    const auto pairs = numbered_pairs(60);
    const auto a = split_pairs(pairs, 7);
    const auto b = split_pairs(pairs, 7);
    const auto c = split_pairs(pairs, 8);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.valid, b.valid);
    EXPECT_EQ(a.test, b.test);
    EXPECT_EQ(split_manifest_json(a), split_manifest_json(b));
    EXPECT_NE(a.train, c.train);
}

TEST(SplitPairs, RejectsBadInput) {
    EXPECT_THROW(split_pairs(numbered_pairs(2), 0), Error);
    EXPECT_THROW(split_pairs(numbered_pairs(10), 0, {0.5, 0.5, 0.5}), Error);
    EXPECT_THROW(split_pairs(numbered_pairs(10), 0, {0.0, 0.5, 0.5}), Error);
    EXPECT_THROW(split_pairs(numbered_pairs(10), 0, {1.2, -0.1, -0.1}), Error);
}

TEST(CorpusStats, EmptyAndNonEmpty) {
    const auto empty = corpus_stats(std::vector<CodePair>{});
    EXPECT_EQ(empty.count, 0u);
    EXPECT_FALSE(empty.mean_ed);
    const std::vector<CodePair> pairs{make_pair("p", "u", "a", "b"), make_pair("p", "u", "aaa", "b")};
    const auto s = corpus_stats(pairs);
    EXPECT_EQ(s.count, 2u);
    EXPECT_DOUBLE_EQ(*s.mean_ed, 2.0);
    EXPECT_DOUBLE_EQ(*s.std_ed, 1.0);
}

TEST(PairsFile, RoundTrip) {
    const std::vector<CodePair> pairs{make_pair("p", "u", "print(1)\n", "print(2)\n"),
                                      make_pair("q", "v", "caf\xc3\xa9", "\"quoted\"\t")};
    std::stringstream buf;
    write_pairs(buf, pairs);
    EXPECT_EQ(read_pairs(buf), pairs);
    std::istringstream bad(R"({"pair_id":"x","problem_id":"p","user_id":"u","wrong":"a","correct":"b","original_ed":-1})");
    EXPECT_THROW(read_pairs(bad), IngestError);
}

TEST(MiniCorpusFile, PairsFromSubmissionsFile) {
    std::ifstream in(oracle::data_dir() / "mini" / "submissions.jsonl");
    const auto records = read_submissions(in);
    ASSERT_EQ(records.size(), 30u);
    const auto pairs = pair_submissions(records);
    EXPECT_EQ(pairs.size(), 14u);
    EXPECT_EQ(dedupe_pairs(pairs).size(), 13u);
    for (const auto& p : pairs) EXPECT_NE(p.wrong_source, p.correct_source);
}

}  // namespace
}  // namespace minrepair::corpus
