#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "minrepair/tokenize.hpp"
#include "minrepair/verdict.hpp"

namespace minrepair::corpus {

struct SubmissionRecord {
    std::string user_id;
    std::string problem_id;
    std::int64_t submitted_at_ms = 0;  // Unix epoch, milliseconds
    Verdict verdict = Verdict::WA;
    std::string source;
};

struct CodePair {
    std::string pair_id;
    std::string problem_id;
    std::string user_id;
    std::string wrong_source;
    std::string correct_source;
    std::size_t original_ed = 0;

    friend bool operator==(const CodePair&, const CodePair&) = default;
};

struct CorpusSplit {
    std::vector<CodePair> train;
    std::vector<CodePair> valid;
    std::vector<CodePair> test;
    std::uint64_t seed = 0;
};

struct CorpusStats {
    std::size_t count = 0;
    std::optional<double> mean_ed;
    std::optional<double> std_ed;
};

// Parses "YYYY-MM-DDTHH:MM:SS.mmm" with an optional "Z" or "+HH:MM"/"-HH:MM"
// offset. Throws Error on anything else.
std::int64_t parse_timestamp_ms(std::string_view text);
std::string format_timestamp_ms(std::int64_t ms);

// Content hash of (problem_id, wrong, correct).
std::string make_pair_id(std::string_view problem_id, std::string_view wrong, std::string_view correct);
CodePair make_pair(std::string problem_id, std::string user_id, std::string wrong, std::string correct);

// One JSON object per line. Errors name the line.
std::vector<SubmissionRecord> read_submissions(std::istream& in);

// Pairs every non-AC submission with the next strictly later AC of the same
// user on the same problem. Output sorted by (user_id, problem_id, wrong time).
std::vector<CodePair> pair_submissions(std::span<const SubmissionRecord> records);

// Keeps pairs whose wrong and correct token counts are both in (0, max_len).
std::vector<CodePair> filter_pairs(std::span<const CodePair> pairs, const tokenize::Tokenizer& tok,
                                   std::size_t max_len = 256);

// Collapses exact (wrong, correct, problem_id) duplicates to the first occurrence.
std::vector<CodePair> dedupe_pairs(std::span<const CodePair> pairs);

// Seeded shuffle, then valid/test sizes are round(N * ratio) (at least 1) and
// train takes the rest. Requires N >= 3 and ratios summing to 1.
CorpusSplit split_pairs(std::span<const CodePair> pairs, std::uint64_t seed,
                        std::array<double, 3> ratios = {0.90, 0.05, 0.05});

CorpusStats corpus_stats(std::span<const CodePair> pairs);

std::vector<CodePair> read_pairs(std::istream& in);
std::vector<CodePair> load_pairs(const std::string& path);
void write_pairs(std::ostream& out, std::span<const CodePair> pairs);
void save_pairs(const std::string& path, std::span<const CodePair> pairs);

// {"seed", "train": [pair_id...], "valid": [...], "test": [...]}
std::string split_manifest_json(const CorpusSplit& split);

}  // namespace minrepair::corpus
