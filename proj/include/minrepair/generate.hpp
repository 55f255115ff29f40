#pragma once

#include <chrono>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "minrepair/corpus.hpp"

namespace minrepair::generate {

struct Candidate {
    std::string pair_id;
    std::int64_t sample_index = 0;
    std::string source;
    std::string generator_id;

    friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct GeneratorConfig {
    std::int64_t n_samples = 100;
    double temperature = 0.7;
    std::int64_t max_tokens = 256;

    // Throws Error when a field is out of range.
    void validate() const;
};

// problem_id -> distinct correct sources of train pairs, first-occurrence order.
using RetrievalIndex = std::map<std::string, std::vector<std::string>>;

std::vector<Candidate> gen_copy(const corpus::CodePair& pair);

RetrievalIndex build_retrieval_index(std::span<const corpus::CodePair> train_pairs);

// Linear scan for the indexed program closest (edit distance) to the wrong
// source; ties keep the earliest. Throws Error if the problem is not indexed.
std::vector<Candidate> gen_retrieval(const corpus::CodePair& pair, const RetrievalIndex& index);

// n_samples programs derived from the correct source by 0..3 random
// single-character edits. Sample 0 is the correct source itself.
std::vector<Candidate> gen_mutate(const corpus::CodePair& pair, const GeneratorConfig& config, std::uint64_t seed);

struct PairError {
    std::string pair_id;
    std::string message;
};

struct ExternalRun {
    std::vector<Candidate> candidates;
    std::vector<PairError> errors;
};

struct ExternalOptions {
    std::string generator_id = "external";
    std::chrono::milliseconds per_pair_timeout{120000};
};

// Drives a child process over the line-delimited JSON generator protocol.
// A pair answered with the wrong number of samples becomes a PairError and
// the run continues; malformed lines, timeouts, and a nonzero exit throw
// ProtocolError naming the pair.
ExternalRun run_external(const std::string& command, std::span<const corpus::CodePair> pairs,
                         const GeneratorConfig& config, const ExternalOptions& options = {});

// Replay file: {"pair_id","sample_index","source","generator_id"} per line.
// Schema violations and duplicate (pair_id, sample_index) raise IngestError.
std::vector<Candidate> read_candidates(std::istream& in);
std::vector<Candidate> load_candidates(const std::string& path);
void write_candidates(std::ostream& out, std::span<const Candidate> candidates);

}  // namespace minrepair::generate
