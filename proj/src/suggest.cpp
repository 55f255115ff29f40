#include "minrepair/suggest.hpp"

#include <algorithm>
#include <tuple>

#include "minrepair/metrics.hpp"
#include "minrepair/util.hpp"

namespace minrepair::suggest {

namespace {

enum class OpKind { Equal, Delete, Insert };

struct Op {
    OpKind kind;
    std::size_t a_index;  // line in a (Equal/Delete)
    std::size_t b_index;  // line in b (Equal/Insert)
};

// Lines keep their '\n' so a missing final newline counts as a difference.
std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        const auto nl = text.find('\n', start);
        const auto end = nl == std::string_view::npos ? text.size() : nl + 1;
        lines.emplace_back(text.substr(start, end - start));
        start = end;
    }
    return lines;
}

std::string normalize_newlines(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\r' && i + 1 < s.size() && s[i + 1] == '\n') continue;
        out.push_back(s[i]);
    }
    return out;
}

// Myers' O((N+M)D) shortest edit script.
std::vector<Op> shortest_edit_script(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const auto n = static_cast<std::ptrdiff_t>(a.size());
    const auto m = static_cast<std::ptrdiff_t>(b.size());
    const std::ptrdiff_t max = n + m;
    const std::ptrdiff_t offset = max + 1;
    std::vector<std::ptrdiff_t> v(static_cast<std::size_t>(2 * max + 3), 0);
    std::vector<std::vector<std::ptrdiff_t>> trace;
    const auto at = [&](std::vector<std::ptrdiff_t>& vec, std::ptrdiff_t k) -> std::ptrdiff_t& {
        return vec[static_cast<std::size_t>(k + offset)];
    };

    bool found = false;
    for (std::ptrdiff_t d = 0; d <= max && !found; ++d) {
        trace.push_back(v);
        for (std::ptrdiff_t k = -d; k <= d; k += 2) {
            std::ptrdiff_t x = (k == -d || (k != d && at(v, k - 1) < at(v, k + 1))) ? at(v, k + 1) : at(v, k - 1) + 1;
            std::ptrdiff_t y = x - k;
            while (x < n && y < m && a[static_cast<std::size_t>(x)] == b[static_cast<std::size_t>(y)]) {
                ++x;
                ++y;
            }
            at(v, k) = x;
            if (x >= n && y >= m) {
                found = true;
                break;
            }
        }
    }

    std::vector<Op> ops;
    std::ptrdiff_t x = n;
    std::ptrdiff_t y = m;
    for (auto d = static_cast<std::ptrdiff_t>(trace.size()) - 1; d >= 0; --d) {
        auto& vd = trace[static_cast<std::size_t>(d)];
        const std::ptrdiff_t k = x - y;
        const std::ptrdiff_t prev_k = (k == -d || (k != d && at(vd, k - 1) < at(vd, k + 1))) ? k + 1 : k - 1;
        const std::ptrdiff_t prev_x = at(vd, prev_k);
        const std::ptrdiff_t prev_y = prev_x - prev_k;
        while (x > prev_x && y > prev_y) {
            --x;
            --y;
            ops.push_back({OpKind::Equal, static_cast<std::size_t>(x), static_cast<std::size_t>(y)});
        }
        if (d > 0) {
            if (x == prev_x) {
                ops.push_back({OpKind::Insert, static_cast<std::size_t>(x), static_cast<std::size_t>(prev_y)});
            } else {
                ops.push_back({OpKind::Delete, static_cast<std::size_t>(prev_x), static_cast<std::size_t>(y)});
            }
        }
        x = prev_x;
        y = prev_y;
    }
    std::reverse(ops.begin(), ops.end());
    return ops;
}

void emit_line(std::string& out, char prefix, const std::string& line) {
    out.push_back(prefix);
    out += line;
    if (line.empty() || line.back() != '\n') out += "\n\\ No newline at end of file\n";
}

std::string range(std::size_t start, std::size_t len) {
    // GNU style: an empty range names the line before it; ",1" is implied.
    const std::size_t first = len == 0 ? start : start + 1;
    if (len == 1) return std::to_string(first);
    return std::to_string(first) + "," + std::to_string(len);
}

}  // namespace

NoCorrectCandidate::NoCorrectCandidate(std::size_t n_candidates, std::vector<Diagnostic> compilable)
    : Error("no correct candidate among " + std::to_string(n_candidates) + " (" + std::to_string(compilable.size()) +
            " compilable)"),
      n_candidates_(n_candidates),
      compilable_(std::move(compilable)) {}

Suggestion select_minimal(std::string_view wrong_source, std::span<const JudgedCandidate> judged) {
    if (judged.empty()) throw Error("select_minimal: no candidates");
    const std::u32string wrong = decode_utf8(wrong_source);
    const JudgedCandidate* best = nullptr;
    std::size_t best_ed = 0;
    std::size_t n_correct = 0;
    std::vector<Diagnostic> compilable;
    for (const auto& jc : judged) {
        const std::size_t ed = metrics::edit_distance(wrong, decode_utf8(jc.candidate.source));
        if (jc.result.verdict != Verdict::AC) {
            if (jc.result.verdict != Verdict::CE) compilable.push_back({jc.candidate, jc.result.verdict, ed});
            continue;
        }
        ++n_correct;
        if (best == nullptr || std::tie(ed, jc.candidate.sample_index, jc.candidate.generator_id) <
                                   std::tie(best_ed, best->candidate.sample_index, best->candidate.generator_id)) {
            best = &jc;
            best_ed = ed;
        }
    }
    if (best == nullptr) {
        std::stable_sort(compilable.begin(), compilable.end(), [](const Diagnostic& x, const Diagnostic& y) {
            return std::tie(x.edit_distance, x.candidate.sample_index) < std::tie(y.edit_distance, y.candidate.sample_index);
        });
        throw NoCorrectCandidate(judged.size(), std::move(compilable));
    }
    Suggestion s;
    s.pair_id = best->candidate.pair_id;
    s.selected = best->candidate;
    s.edit_distance = best_ed;
    s.unified_diff = render_diff(wrong_source, best->candidate.source);
    s.n_candidates = judged.size();
    s.n_correct = n_correct;
    return s;
}

std::string render_diff(std::string_view a, std::string_view b, std::string_view from_label, std::string_view to_label) {
    constexpr std::size_t kContext = 3;
    const auto a_lines = split_lines(normalize_newlines(a));
    const auto b_lines = split_lines(normalize_newlines(b));
    const auto ops = shortest_edit_script(a_lines, b_lines);

    std::vector<std::size_t> changes;
    for (std::size_t i = 0; i < ops.size(); ++i) {
        if (ops[i].kind != OpKind::Equal) changes.push_back(i);
    }
    if (changes.empty()) return {};

    std::string out;
    out += "--- ";
    out += from_label;
    out += "\n+++ ";
    out += to_label;
    out += "\n";

    std::size_t c = 0;
    while (c < changes.size()) {
        const std::size_t first = changes[c] >= kContext ? changes[c] - kContext : 0;
        std::size_t last_change = changes[c];
        // Merge changes whose separating run of equal lines fits in two contexts.
        while (c + 1 < changes.size() && changes[c + 1] - last_change <= 2 * kContext + 1) {
            last_change = changes[++c];
        }
        ++c;
        const std::size_t last = std::min(ops.size() - 1, last_change + kContext);

        std::size_t a_start = 0;
        std::size_t b_start = 0;
        // Position of the hunk start in each file.
        {
            const Op& op = ops[first];
            a_start = op.a_index;
            b_start = op.b_index;
        }
        std::size_t a_len = 0;
        std::size_t b_len = 0;
        std::string body;
        for (std::size_t i = first; i <= last; ++i) {
            const Op& op = ops[i];
            switch (op.kind) {
                case OpKind::Equal:
                    emit_line(body, ' ', a_lines[op.a_index]);
                    ++a_len;
                    ++b_len;
                    break;
                case OpKind::Delete:
                    emit_line(body, '-', a_lines[op.a_index]);
                    ++a_len;
                    break;
                case OpKind::Insert:
                    emit_line(body, '+', b_lines[op.b_index]);
                    ++b_len;
                    break;
            }
        }
        out += "@@ -" + range(a_start, a_len) + " +" + range(b_start, b_len) + " @@\n";
        out += body;
    }
    return out;
}

std::string suggestion_json(const Suggestion& s) {
    ordered_json j;
    j["pair_id"] = s.pair_id;
    j["source"] = s.selected.source;
    j["edit_distance"] = s.edit_distance;
    j["diff"] = s.unified_diff;
    j["n_candidates"] = s.n_candidates;
    j["n_correct"] = s.n_correct;
    j["generator_id"] = s.selected.generator_id;
    j["sample_index"] = s.selected.sample_index;
    return j.dump(2) + "\n";
}

}  // namespace minrepair::suggest
