#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "minrepair/corpus.hpp"
#include "minrepair/error.hpp"
#include "minrepair/generate.hpp"
#include "minrepair/judge.hpp"
#include "minrepair/metrics.hpp"
#include "minrepair/tokenize.hpp"

namespace minrepair::evalreport {

// k values reported when the sample count allows them.
inline constexpr std::int64_t kReportedK[] = {1, 10, 100};

struct EvalReport {
    std::string model_id;
    std::map<std::int64_t, double> pass_at;
    std::map<std::int64_t, double> compilable_at;
    double bleu = 0.0;
    double exact_match_rate = 0.0;
    metrics::EdFamily ed;
    std::size_t n_pairs = 0;
    std::int64_t n_samples_per_pair = 0;
    generate::GeneratorConfig config;
    std::uint64_t seed = 0;
    std::string generator;
    std::size_t tokenizer_vocab_size = 0;
    std::string tokenizer_sha256;
    // problem_id -> (time_ms, memory_kib)
    std::map<std::string, std::pair<std::int64_t, std::int64_t>> judge_limits;
};

// Per-pair counts behind the estimators.
struct PairSummary {
    std::string pair_id;
    std::string problem_id;
    std::size_t original_ed = 0;
    std::int64_t n = 0;
    std::int64_t n_correct = 0;
    std::int64_t n_compilable = 0;
    double pass_at_max_k = 0.0;
};

struct Bucket {
    std::size_t lo = 0;
    std::size_t hi = 0;  // exclusive
    std::optional<double> mean_pass;
    std::size_t n_pairs = 0;
};

struct GroupedPass {
    std::vector<Bucket> buckets;
};

struct ScatterPoint {
    std::string pair_id;
    std::int64_t sample_index = 0;
    std::size_t original_ed = 0;
    std::size_t generated_ed = 0;
    bool pair_correct = false;
};

struct ScatterData {
    std::vector<ScatterPoint> points;
};

struct Evaluation {
    EvalReport report;
    std::vector<PairSummary> pairs;             // sorted by pair_id
    std::vector<metrics::SampleOutcome> outcomes;  // sorted by (pair_id, sample_index)
    std::vector<generate::Candidate> candidates;
    std::vector<judge::VerdictRecord> verdicts;
};

// Produces the candidates for a batch of pairs.
using CandidateSource = std::function<std::vector<generate::Candidate>(std::span<const corpus::CodePair>)>;

struct EvaluateOptions {
    std::string model_id = "model";
    std::string generator = "unknown";
    generate::GeneratorConfig config;
    std::uint64_t seed = 0;
    std::size_t jobs = 0;
    const tokenize::BpeModel* tokenizer = nullptr;  // byte-level model when null
    judge::JudgeCache* cache = nullptr;
};

// Thrown when generation or judging fails partway; lists the pairs whose
// samples were fully judged.
class EvaluationAborted : public Error {
public:
    EvaluationAborted(std::string stage, const std::string& message, std::vector<std::string> completed_pairs);

    const std::string& stage() const noexcept { return stage_; }
    const std::vector<std::string>& completed_pairs() const noexcept { return completed_; }
    std::string manifest_json() const;

private:
    std::string stage_;
    std::string message_;
    std::vector<std::string> completed_;
};

// Generates, judges, and aggregates.
Evaluation evaluate(std::span<const corpus::CodePair> pairs, const CandidateSource& source, const judge::Judge& judge,
                    const std::map<std::string, judge::ProblemSpec>& problems, const EvaluateOptions& options);

// Aggregation only, from candidates and their verdicts (e.g. replayed from
// files). Every pair must have the same number of candidates and every
// candidate a verdict.
Evaluation aggregate(std::span<const corpus::CodePair> pairs, std::vector<generate::Candidate> candidates,
                     std::span<const judge::VerdictRecord> verdicts,
                     const std::map<std::string, judge::ProblemSpec>& problems, const EvaluateOptions& options);

// Buckets [0, w), [w, 2w), ... up to the largest original_ed; empty buckets
// are kept with n_pairs 0. Throws Error when bucket_width is 0.
GroupedPass group_pass_by_original_ed(std::span<const PairSummary> pairs, std::size_t bucket_width);

// One point per sample; pair_correct means the pair has any AC sample.
ScatterData scatter(std::span<const metrics::SampleOutcome> outcomes, std::span<const PairSummary> pairs);

std::string report_json(const EvalReport& report);
EvalReport parse_report_json(std::string_view text);
// Columns: Pass@1/10/100, Compilable@1/10/100, BLEU, Exact Match, ED All/Correct/Top-1.
std::string render_table(std::span<const EvalReport> reports);
std::string grouped_csv(const GroupedPass& grouped);
std::string scatter_csv(const ScatterData& data);

}  // namespace minrepair::evalreport
