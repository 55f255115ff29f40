#include "minrepair/corpus.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <tuple>

#include "minrepair/error.hpp"
#include "minrepair/metrics.hpp"
#include "minrepair/util.hpp"

namespace minrepair::corpus {

namespace {

int parse_digits(std::string_view text, std::size_t pos, std::size_t len) {
    if (pos + len > text.size()) throw Error("timestamp too short: '" + std::string(text) + "'");
    int value = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (text[i] < '0' || text[i] > '9') throw Error("bad timestamp: '" + std::string(text) + "'");
        value = value * 10 + (text[i] - '0');
    }
    return value;
}

void expect_char(std::string_view text, std::size_t pos, char c) {
    if (pos >= text.size() || text[pos] != c) throw Error("bad timestamp: '" + std::string(text) + "'");
}

}  // namespace

std::int64_t parse_timestamp_ms(std::string_view text) {
    using namespace std::chrono;
    const int y = parse_digits(text, 0, 4);
    expect_char(text, 4, '-');
    const int mo = parse_digits(text, 5, 2);
    expect_char(text, 7, '-');
    const int d = parse_digits(text, 8, 2);
    if (text.size() < 11 || (text[10] != 'T' && text[10] != ' ')) throw Error("bad timestamp: '" + std::string(text) + "'");
    const int h = parse_digits(text, 11, 2);
    expect_char(text, 13, ':');
    const int mi = parse_digits(text, 14, 2);
    expect_char(text, 16, ':');
    const int s = parse_digits(text, 17, 2);
    std::size_t pos = 19;
    std::int64_t ms = 0;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        int digits = 0;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
            if (digits < 3) ms = ms * 10 + (text[pos] - '0');
            ++digits;
            ++pos;
        }
        if (digits == 0) throw Error("bad timestamp: '" + std::string(text) + "'");
        for (int i = digits; i < 3; ++i) ms *= 10;
    }
    std::int64_t offset_min = 0;
    if (pos < text.size()) {
        if (text[pos] == 'Z' && pos + 1 == text.size()) {
            ++pos;
        } else if ((text[pos] == '+' || text[pos] == '-') && pos + 6 == text.size()) {
            const int sign = text[pos] == '+' ? 1 : -1;
            const int oh = parse_digits(text, pos + 1, 2);
            expect_char(text, pos + 3, ':');
            const int om = parse_digits(text, pos + 4, 2);
            offset_min = sign * (oh * 60 + om);
        } else {
            throw Error("bad timestamp: '" + std::string(text) + "'");
        }
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 60) throw Error("bad timestamp: '" + std::string(text) + "'");
    const auto tp = sys_days{ymd} + hours{h} + minutes{mi} + seconds{s} + milliseconds{ms} - minutes{offset_min};
    return duration_cast<milliseconds>(tp.time_since_epoch()).count();
}

std::string format_timestamp_ms(std::int64_t ms) {
    using namespace std::chrono;
    const sys_time<milliseconds> tp{milliseconds{ms}};
    const auto day_point = floor<days>(tp);
    const year_month_day ymd{day_point};
    const hh_mm_ss<milliseconds> tod{tp - day_point};
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lld.%03lldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long long>(tod.hours().count()), static_cast<long long>(tod.minutes().count()),
                  static_cast<long long>(tod.seconds().count()), static_cast<long long>(tod.subseconds().count()));
    return buf;
}

std::string make_pair_id(std::string_view problem_id, std::string_view wrong, std::string_view correct) {
    std::string framed;
    for (const std::string_view part : {problem_id, wrong, correct}) {
        framed += std::to_string(part.size());
        framed += ':';
        framed += part;
    }
    return sha256_hex(framed).substr(0, 16);
}

CodePair make_pair(std::string problem_id, std::string user_id, std::string wrong, std::string correct) {
    CodePair p;
    p.pair_id = make_pair_id(problem_id, wrong, correct);
    p.original_ed = metrics::edit_distance(wrong, correct);
    p.problem_id = std::move(problem_id);
    p.user_id = std::move(user_id);
    p.wrong_source = std::move(wrong);
    p.correct_source = std::move(correct);
    return p;
}

std::vector<SubmissionRecord> read_submissions(std::istream& in) {
    std::vector<SubmissionRecord> records;
    for_each_jsonl(in, [&](std::size_t line, const json& obj) {
        SubmissionRecord r;
        r.user_id = require_string(obj, "user_id", line);
        r.problem_id = require_string(obj, "problem_id", line);
        const std::string ts = require_string(obj, "submitted_at", line);
        try {
            r.submitted_at_ms = parse_timestamp_ms(ts);
        } catch (const Error& e) {
            throw IngestError(line, e.what());
        }
        const std::string verdict = require_string(obj, "verdict", line);
        const auto v = parse_verdict(verdict);
        if (!v) throw IngestError(line, "unknown verdict '" + verdict + "'");
        r.verdict = *v;
        r.source = require_string(obj, "source", line);
        if (!is_valid_utf8(r.source)) throw IngestError(line, "source is not valid UTF-8");
        records.push_back(std::move(r));
    });
    return records;
}

std::vector<CodePair> pair_submissions(std::span<const SubmissionRecord> records) {
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Stable: equal timestamps keep input order.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = records[a];
        const auto& y = records[b];
        return std::tie(x.user_id, x.problem_id, x.submitted_at_ms) <
               std::tie(y.user_id, y.problem_id, y.submitted_at_ms);
    });

    std::vector<CodePair> pairs;
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const SubmissionRecord& r = records[order[i]];
        if (i > 0) {
            const SubmissionRecord& prev = records[order[i - 1]];
            if (prev.user_id != r.user_id || prev.problem_id != r.problem_id) pending.clear();
        }
        if (r.verdict != Verdict::AC) {
            pending.push_back(order[i]);
            continue;
        }
        std::vector<std::size_t> still_pending;
        for (const std::size_t w : pending) {
            const SubmissionRecord& wrong = records[w];
            if (wrong.submitted_at_ms < r.submitted_at_ms) {
                pairs.push_back(make_pair(r.problem_id, r.user_id, wrong.source, r.source));
            } else {
                still_pending.push_back(w);
            }
        }
        pending = std::move(still_pending);
    }
    return pairs;
}

std::vector<CodePair> filter_pairs(std::span<const CodePair> pairs, const tokenize::Tokenizer& tok, std::size_t max_len) {
    std::vector<CodePair> kept;
    for (const auto& p : pairs) {
        const std::size_t wrong = tok.count(p.wrong_source);
        const std::size_t correct = tok.count(p.correct_source);
        if (wrong > 0 && correct > 0 && wrong < max_len && correct < max_len) kept.push_back(p);
    }
    return kept;
}

std::vector<CodePair> dedupe_pairs(std::span<const CodePair> pairs) {
    std::set<std::tuple<std::string_view, std::string_view, std::string_view>> seen;
    std::vector<CodePair> out;
    for (const auto& p : pairs) {
        if (seen.emplace(p.wrong_source, p.correct_source, p.problem_id).second) out.push_back(p);
    }
    return out;
}

CorpusSplit split_pairs(std::span<const CodePair> pairs, std::uint64_t seed, std::array<double, 3> ratios) {
    for (const double r : ratios) {
        if (!(r >= 0.0)) throw Error("split: ratios must be nonnegative");
    }
    if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) throw Error("split: ratios must sum to 1");
    const std::size_t n = pairs.size();
    if (n < 3) throw Error("split: need at least 3 pairs to populate train/valid/test, got " + std::to_string(n));

    const auto sized = [n](double ratio) {
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratio)));
    };
    std::size_t n_valid = sized(ratios[1]);
    std::size_t n_test = sized(ratios[2]);
    if (n_valid + n_test > n - 1) throw Error("split: ratios leave no pairs for training");

    std::vector<CodePair> shuffled(pairs.begin(), pairs.end());
    Rng rng(seed);
    rng.shuffle(shuffled);

    CorpusSplit split;
    split.seed = seed;
    const std::size_t n_train = n - n_valid - n_test;
    const auto begin = std::make_move_iterator(shuffled.begin());
    split.train.assign(begin, begin + static_cast<std::ptrdiff_t>(n_train));
    split.valid.assign(begin + static_cast<std::ptrdiff_t>(n_train), begin + static_cast<std::ptrdiff_t>(n_train + n_valid));
    split.test.assign(begin + static_cast<std::ptrdiff_t>(n_train + n_valid), std::make_move_iterator(shuffled.end()));
    return split;
}

CorpusStats corpus_stats(std::span<const CodePair> pairs) {
    std::vector<double> eds;
    eds.reserve(pairs.size());
    for (const auto& p : pairs) eds.push_back(static_cast<double>(p.original_ed));
    const auto ms = metrics::mean_std(eds);
    return {pairs.size(), ms.mean, ms.std};
}

std::vector<CodePair> read_pairs(std::istream& in) {
    std::vector<CodePair> pairs;
    for_each_jsonl(in, [&](std::size_t line, const json& obj) {
        CodePair p;
        p.pair_id = require_string(obj, "pair_id", line);
        p.problem_id = require_string(obj, "problem_id", line);
        p.user_id = require_string(obj, "user_id", line);
        p.wrong_source = require_string(obj, "wrong", line);
        p.correct_source = require_string(obj, "correct", line);
        const std::int64_t ed = require_int(obj, "original_ed", line);
        if (ed < 0) throw IngestError(line, "original_ed must be nonnegative");
        p.original_ed = static_cast<std::size_t>(ed);
        pairs.push_back(std::move(p));
    });
    return pairs;
}

std::vector<CodePair> load_pairs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open pairs file " + path);
    return read_pairs(in);
}

void write_pairs(std::ostream& out, std::span<const CodePair> pairs) {
    for (const auto& p : pairs) {
        ordered_json j;
        j["pair_id"] = p.pair_id;
        j["problem_id"] = p.problem_id;
        j["user_id"] = p.user_id;
        j["wrong"] = p.wrong_source;
        j["correct"] = p.correct_source;
        j["original_ed"] = p.original_ed;
        out << j.dump() << '\n';
    }
}

void save_pairs(const std::string& path, std::span<const CodePair> pairs) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path);
    write_pairs(out, pairs);
}

std::string split_manifest_json(const CorpusSplit& split) {
    ordered_json j;
    j["seed"] = split.seed;
    const auto ids = [](const std::vector<CodePair>& v) {
        json a = json::array();
        for (const auto& p : v) a.push_back(p.pair_id);
        return a;
    };
    j["train"] = ids(split.train);
    j["valid"] = ids(split.valid);
    j["test"] = ids(split.test);
    return j.dump(2) + "\n";
}

}  // namespace minrepair::corpus
