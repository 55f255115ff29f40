#include "minrepair/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "minrepair/error.hpp"
#include "minrepair/util.hpp"

namespace minrepair::metrics {

namespace {

void check_estimator_input(std::int64_t n, std::int64_t c, std::int64_t k) {
    if (n < 1) throw Error("estimator: n must be >= 1, got " + std::to_string(n));
    if (c < 0 || c > n) throw Error("estimator: c must be in [0, n], got " + std::to_string(c));
    if (k < 1 || k > n) throw Error("estimator: k must be in [1, n], got " + std::to_string(k));
}

double unbiased_estimate(std::int64_t n, std::int64_t c, std::int64_t k) {
    check_estimator_input(n, c, k);
    if (n - c < k) return 1.0;
    double prod = 1.0;
    for (std::int64_t i = n - c + 1; i <= n; ++i) {
        prod *= 1.0 - static_cast<double>(k) / static_cast<double>(i);
    }
    return 1.0 - prod;
}

using Ngram = std::vector<std::uint32_t>;

std::map<Ngram, std::size_t> count_ngrams(std::span<const std::uint32_t> seq, std::size_t order) {
    std::map<Ngram, std::size_t> counts;
    if (seq.size() < order) return counts;
    for (std::size_t i = 0; i + order <= seq.size(); ++i) {
        ++counts[Ngram(seq.begin() + static_cast<std::ptrdiff_t>(i),
                       seq.begin() + static_cast<std::ptrdiff_t>(i + order))];
    }
    return counts;
}

}  // namespace

double pass_at_k(std::int64_t n, std::int64_t c, std::int64_t k) { return unbiased_estimate(n, c, k); }

double compilable_at_k(std::int64_t n, std::int64_t c, std::int64_t k) { return unbiased_estimate(n, c, k); }

std::size_t edit_distance(std::string_view a, std::string_view b) {
    if (a == b) return 0;
    return edit_distance(std::u32string_view(decode_utf8(a)), std::u32string_view(decode_utf8(b)));
}

std::size_t edit_distance(std::u32string_view a, std::u32string_view b) {
    // Keep the shorter string on the row so memory is O(min(|a|, |b|)).
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> row(b.size() + 1);
    std::iota(row.begin(), row.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
            row[j] = std::min({up + 1, row[j - 1] + 1, sub});
            diag = up;
        }
    }
    return row[b.size()];
}

double bleu4_smoothed(std::span<const std::uint32_t> candidate, std::span<const std::uint32_t> reference) {
    if (candidate.empty()) return 0.0;
    double log_sum = 0.0;
    for (std::size_t order = 1; order <= 4; ++order) {
        const auto cand = count_ngrams(candidate, order);
        const auto ref = count_ngrams(reference, order);
        std::size_t matches = 0;
        std::size_t total = 0;
        for (const auto& [gram, count] : cand) {
            total += count;
            if (const auto it = ref.find(gram); it != ref.end()) matches += std::min(count, it->second);
        }
        double precision = 0.0;
        if (order == 1) {
            precision = static_cast<double>(matches) / static_cast<double>(total);
        } else {
            precision = static_cast<double>(matches + 1) / static_cast<double>(total + 1);
        }
        if (precision <= 0.0) return 0.0;
        log_sum += std::log(precision);
    }
    double bp = 1.0;
    if (candidate.size() < reference.size()) {
        bp = std::exp(1.0 - static_cast<double>(reference.size()) / static_cast<double>(candidate.size()));
    }
    return 100.0 * bp * std::exp(log_sum / 4.0);
}

bool exact_match(std::string_view candidate, std::string_view target) { return candidate == target; }

MeanStd mean_std(std::span<const double> values) {
    MeanStd out;
    out.count = values.size();
    if (values.empty()) return out;
    double sum = 0.0;
    for (const double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (const double v : values) sq += (v - mean) * (v - mean);
    out.mean = mean;
    out.std = std::sqrt(sq / static_cast<double>(values.size()));
    return out;
}

EdFamily ed_family(std::span<const SampleOutcome> outcomes) {
    std::vector<const SampleOutcome*> sorted;
    sorted.reserve(outcomes.size());
    for (const auto& o : outcomes) sorted.push_back(&o);
    std::sort(sorted.begin(), sorted.end(), [](const SampleOutcome* x, const SampleOutcome* y) {
        return std::tie(x->pair_id, x->sample_index) < std::tie(y->pair_id, y->sample_index);
    });

    std::vector<double> all;
    std::vector<double> correct;
    std::vector<double> top1;
    std::optional<std::size_t> best;
    const std::string* current = nullptr;
    for (const SampleOutcome* o : sorted) {
        if (current == nullptr || *current != o->pair_id) {
            if (best) top1.push_back(static_cast<double>(*best));
            best.reset();
            current = &o->pair_id;
        }
        const auto ed = static_cast<double>(o->ed_to_source);
        all.push_back(ed);
        if (o->correct) {
            correct.push_back(ed);
            best = best ? std::min(*best, o->ed_to_source) : o->ed_to_source;
        }
    }
    if (best) top1.push_back(static_cast<double>(*best));
    return {mean_std(all), mean_std(correct), mean_std(top1)};
}

}  // namespace minrepair::metrics
