#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "minrepair/error.hpp"
#include "minrepair/generate.hpp"
#include "minrepair/judge.hpp"

namespace minrepair::suggest {

struct JudgedCandidate {
    generate::Candidate candidate;
    judge::JudgeResult result;
};

struct Suggestion {
    std::string pair_id;
    generate::Candidate selected;
    std::size_t edit_distance = 0;
    std::string unified_diff;
    std::size_t n_candidates = 0;
    std::size_t n_correct = 0;
};

struct Diagnostic {
    generate::Candidate candidate;
    Verdict verdict = Verdict::WA;
    std::size_t edit_distance = 0;
};

// No candidate was accepted. Carries the compilable candidates, closest
// first, for diagnostics only.
class NoCorrectCandidate : public Error {
public:
    NoCorrectCandidate(std::size_t n_candidates, std::vector<Diagnostic> compilable);

    std::size_t n_candidates() const noexcept { return n_candidates_; }
    const std::vector<Diagnostic>& compilable() const noexcept { return compilable_; }

private:
    std::size_t n_candidates_;
    std::vector<Diagnostic> compilable_;
};

// The AC candidate closest to the wrong program; ties by (sample_index,
// generator_id). Throws NoCorrectCandidate when nothing is AC and Error when
// judged is empty.
Suggestion select_minimal(std::string_view wrong_source, std::span<const JudgedCandidate> judged);

// Unified diff from a to b with 3 lines of context after CRLF -> LF
// normalization. Empty when the normalized texts are equal.
std::string render_diff(std::string_view a, std::string_view b, std::string_view from_label = "wrong",
                        std::string_view to_label = "suggested");

// {"pair_id","source","edit_distance","diff","n_candidates","n_correct","generator_id","sample_index"}
std::string suggestion_json(const Suggestion& s);

}  // namespace minrepair::suggest
