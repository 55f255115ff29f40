#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace minrepair::metrics {

// Unbiased estimator 1 - C(n-c, k) / C(n, k) in product form.
// Requires n >= 1, 0 <= c <= n, 1 <= k <= n; throws Error otherwise.
double pass_at_k(std::int64_t n, std::int64_t c, std::int64_t k);

// Same estimator where c counts samples that pass the syntax gate.
double compilable_at_k(std::int64_t n, std::int64_t c, std::int64_t k);

// Levenshtein distance over Unicode scalar values, unit costs.
std::size_t edit_distance(std::string_view a, std::string_view b);
std::size_t edit_distance(std::u32string_view a, std::u32string_view b);

// Smoothed BLEU-4 in [0, 100]: uniform weights over orders 1..4, add-one
// smoothing on orders >= 2, brevity penalty when the candidate is shorter.
double bleu4_smoothed(std::span<const std::uint32_t> candidate, std::span<const std::uint32_t> reference);

// Byte equality, no normalization.
bool exact_match(std::string_view candidate, std::string_view target);

// Population mean and standard deviation; both empty when values is empty.
struct MeanStd {
    std::optional<double> mean;
    std::optional<double> std;
    std::size_t count = 0;
};

MeanStd mean_std(std::span<const double> values);

struct SampleOutcome {
    std::string pair_id;
    std::int64_t sample_index = 0;
    bool correct = false;
    bool compilable = false;
    std::size_t ed_to_source = 0;
    double bleu_vs_target = 0.0;
    bool exact_match_vs_target = false;
};

struct EdFamily {
    MeanStd all;
    MeanStd correct;
    MeanStd top1;
};

// Aggregates edit distances. Outcomes are reduced in (pair_id, sample_index)
// order regardless of input order. Pairs without a correct sample do not
// contribute to correct/top1.
EdFamily ed_family(std::span<const SampleOutcome> outcomes);

}  // namespace minrepair::metrics
