#include "minrepair/evalreport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "minrepair/error.hpp"
#include "minrepair/util.hpp"

namespace minrepair::evalreport {

namespace {

json mean_std_json(const metrics::MeanStd& ms) {
    ordered_json j;
    j["mean"] = ms.mean ? json(*ms.mean) : json(nullptr);
    j["std"] = ms.std ? json(*ms.std) : json(nullptr);
    j["count"] = ms.count;
    return j;
}

metrics::MeanStd mean_std_from(const json& j) {
    metrics::MeanStd ms;
    if (!j.at("mean").is_null()) ms.mean = j.at("mean").get<double>();
    if (!j.at("std").is_null()) ms.std = j.at("std").get<double>();
    ms.count = j.value("count", std::size_t{0});
    return ms;
}

std::string percent(std::optional<double> v) {
    if (!v) return "---";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", *v * 100.0);
    return buf;
}

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string ed_cell(const metrics::MeanStd& ms) {
    if (!ms.mean) return "---";
    return fixed2(*ms.mean) + " (" + fixed2(*ms.std) + ")";
}

std::optional<double> lookup(const std::map<std::int64_t, double>& m, std::int64_t k) {
    const auto it = m.find(k);
    if (it == m.end()) return std::nullopt;
    return it->second;
}

}  // namespace

EvaluationAborted::EvaluationAborted(std::string stage, const std::string& message, std::vector<std::string> completed_pairs)
    : Error("evaluation aborted during " + stage + ": " + message),
      stage_(std::move(stage)),
      message_(message),
      completed_(std::move(completed_pairs)) {}

std::string EvaluationAborted::manifest_json() const {
    ordered_json j;
    j["status"] = "aborted";
    j["stage"] = stage_;
    j["error"] = message_;
    j["completed_pairs"] = completed_;
    return j.dump(2) + "\n";
}

Evaluation evaluate(std::span<const corpus::CodePair> pairs, const CandidateSource& source, const judge::Judge& judge,
                    const std::map<std::string, judge::ProblemSpec>& problems, const EvaluateOptions& options) {
    std::vector<generate::Candidate> candidates;
    try {
        candidates = source(pairs);
    } catch (const std::exception& e) {
        throw EvaluationAborted("generate", e.what(), {});
    }

    std::map<std::string, std::string> problem_of_pair;
    for (const auto& p : pairs) {
        if (!problems.contains(p.problem_id)) throw ConfigError("no problem definition for " + p.problem_id);
        problem_of_pair[p.pair_id] = p.problem_id;
    }
    const auto entries = judge::judge_batch(judge, candidates, problem_of_pair, problems, options.jobs, options.cache);

    std::vector<judge::VerdictRecord> verdicts;
    std::set<std::string> failed_pairs;
    std::string first_error;
    for (const auto& e : entries) {
        const auto& c = candidates[e.candidate_index];
        if (!e.result) {
            failed_pairs.insert(c.pair_id);
            if (first_error.empty()) first_error = c.pair_id + "/" + std::to_string(c.sample_index) + ": " + e.error;
            continue;
        }
        verdicts.push_back(judge::to_record(c.pair_id, c.sample_index, *e.result));
    }
    if (!failed_pairs.empty()) {
        std::vector<std::string> completed;
        for (const auto& p : pairs) {
            if (!failed_pairs.contains(p.pair_id)) completed.push_back(p.pair_id);
        }
        std::sort(completed.begin(), completed.end());
        throw EvaluationAborted("judge", first_error, std::move(completed));
    }
    return aggregate(pairs, std::move(candidates), verdicts, problems, options);
}

Evaluation aggregate(std::span<const corpus::CodePair> pairs, std::vector<generate::Candidate> candidates,
                     std::span<const judge::VerdictRecord> verdicts,
                     const std::map<std::string, judge::ProblemSpec>& problems, const EvaluateOptions& options) {
    const tokenize::BpeModel byte_level;
    const tokenize::BpeModel& tok = options.tokenizer ? *options.tokenizer : byte_level;

    std::map<std::string, const corpus::CodePair*> by_id;
    for (const auto& p : pairs) by_id[p.pair_id] = &p;
    std::map<std::pair<std::string, std::int64_t>, const judge::VerdictRecord*> verdict_of;
    for (const auto& v : verdicts) verdict_of[{v.pair_id, v.sample_index}] = &v;

    std::sort(candidates.begin(), candidates.end(), [](const generate::Candidate& a, const generate::Candidate& b) {
        return std::tie(a.pair_id, a.sample_index) < std::tie(b.pair_id, b.sample_index);
    });

    Evaluation ev;
    std::map<std::string, PairSummary> summaries;
    std::map<std::string, tokenize::TokenSeq> target_tokens;
    for (const auto& c : candidates) {
        const auto pit = by_id.find(c.pair_id);
        if (pit == by_id.end()) throw Error("candidate for unknown pair " + c.pair_id);
        const auto vit = verdict_of.find({c.pair_id, c.sample_index});
        if (vit == verdict_of.end()) {
            throw Error("no verdict for candidate " + c.pair_id + "/" + std::to_string(c.sample_index));
        }
        const corpus::CodePair& pair = *pit->second;
        const Verdict verdict = vit->second->verdict;

        auto [tit, fresh] = target_tokens.try_emplace(pair.pair_id);
        if (fresh) tit->second = tok.encode(pair.correct_source);

        metrics::SampleOutcome o;
        o.pair_id = c.pair_id;
        o.sample_index = c.sample_index;
        o.correct = verdict == Verdict::AC;
        o.compilable = verdict != Verdict::CE;
        o.ed_to_source = metrics::edit_distance(pair.wrong_source, c.source);
        o.bleu_vs_target = metrics::bleu4_smoothed(tok.encode(c.source), tit->second);
        o.exact_match_vs_target = metrics::exact_match(c.source, pair.correct_source);
        ev.outcomes.push_back(o);

        PairSummary& s = summaries[pair.pair_id];
        s.pair_id = pair.pair_id;
        s.problem_id = pair.problem_id;
        s.original_ed = pair.original_ed;
        ++s.n;
        s.n_correct += o.correct ? 1 : 0;
        s.n_compilable += o.compilable ? 1 : 0;
        ev.verdicts.push_back(*vit->second);
    }
    for (const auto& p : pairs) {
        if (!summaries.contains(p.pair_id)) throw Error("pair " + p.pair_id + " has no candidates");
    }

    std::int64_t n = 0;
    for (const auto& [id, s] : summaries) {
        if (n == 0) n = s.n;
        if (s.n != n) {
            throw Error("pair " + id + " has " + std::to_string(s.n) + " candidates, expected " + std::to_string(n));
        }
    }

    EvalReport& r = ev.report;
    r.model_id = options.model_id;
    r.generator = options.generator;
    r.config = options.config;
    r.seed = options.seed;
    r.n_pairs = summaries.size();
    r.n_samples_per_pair = n;
    r.tokenizer_vocab_size = tok.vocab_size();
    r.tokenizer_sha256 = sha256_hex(tok.to_json());
    for (const auto& [id, s] : summaries) {
        const auto prob = problems.find(s.problem_id);
        if (prob == problems.end()) throw ConfigError("no problem definition for " + s.problem_id);
        r.judge_limits[s.problem_id] = {prob->second.time_limit_ms, prob->second.memory_limit_kib};
    }

    std::int64_t max_k = 0;
    for (const std::int64_t k : kReportedK) {
        if (k > n) continue;
        max_k = k;
        double pass_sum = 0.0;
        double comp_sum = 0.0;
        for (const auto& [id, s] : summaries) {
            pass_sum += metrics::pass_at_k(s.n, s.n_correct, k);
            comp_sum += metrics::compilable_at_k(s.n, s.n_compilable, k);
        }
        r.pass_at[k] = r.n_pairs ? pass_sum / static_cast<double>(r.n_pairs) : 0.0;
        r.compilable_at[k] = r.n_pairs ? comp_sum / static_cast<double>(r.n_pairs) : 0.0;
    }

    double bleu_sum = 0.0;
    double em_sum = 0.0;
    for (const auto& o : ev.outcomes) {
        bleu_sum += o.bleu_vs_target;
        em_sum += o.exact_match_vs_target ? 1.0 : 0.0;
    }
    if (!ev.outcomes.empty()) {
        r.bleu = bleu_sum / static_cast<double>(ev.outcomes.size());
        r.exact_match_rate = em_sum / static_cast<double>(ev.outcomes.size());
    }
    r.ed = metrics::ed_family(ev.outcomes);

    for (auto& [id, s] : summaries) {
        if (max_k > 0) s.pass_at_max_k = metrics::pass_at_k(s.n, s.n_correct, max_k);
        ev.pairs.push_back(s);
    }
    ev.candidates = std::move(candidates);
    return ev;
}

GroupedPass group_pass_by_original_ed(std::span<const PairSummary> pairs, std::size_t bucket_width) {
    if (bucket_width == 0) throw Error("bucket width must be positive");
    GroupedPass out;
    if (pairs.empty()) return out;
    std::size_t max_ed = 0;
    for (const auto& p : pairs) max_ed = std::max(max_ed, p.original_ed);
    const std::size_t n_buckets = max_ed / bucket_width + 1;
    std::vector<double> sums(n_buckets, 0.0);
    out.buckets.resize(n_buckets);
    for (std::size_t b = 0; b < n_buckets; ++b) {
        out.buckets[b].lo = b * bucket_width;
        out.buckets[b].hi = (b + 1) * bucket_width;
    }
    // Deterministic summation order.
    std::vector<const PairSummary*> sorted;
    for (const auto& p : pairs) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->pair_id < b->pair_id; });
    for (const auto* p : sorted) {
        const std::size_t b = p->original_ed / bucket_width;
        sums[b] += p->pass_at_max_k;
        ++out.buckets[b].n_pairs;
    }
    for (std::size_t b = 0; b < n_buckets; ++b) {
        if (out.buckets[b].n_pairs > 0) out.buckets[b].mean_pass = sums[b] / static_cast<double>(out.buckets[b].n_pairs);
    }
    return out;
}

ScatterData scatter(std::span<const metrics::SampleOutcome> outcomes, std::span<const PairSummary> pairs) {
    std::map<std::string, const PairSummary*> by_id;
    for (const auto& p : pairs) by_id[p.pair_id] = &p;
    ScatterData data;
    for (const auto& o : outcomes) {
        const auto it = by_id.find(o.pair_id);
        if (it == by_id.end()) throw Error("scatter: outcome for unknown pair " + o.pair_id);
        data.points.push_back({o.pair_id, o.sample_index, it->second->original_ed, o.ed_to_source, it->second->n_correct > 0});
    }
    return data;
}

std::string report_json(const EvalReport& r) {
    ordered_json j;
    j["model_id"] = r.model_id;
    j["n_pairs"] = r.n_pairs;
    j["n_samples_per_pair"] = r.n_samples_per_pair;
    ordered_json pass = ordered_json::object();
    for (const auto& [k, v] : r.pass_at) pass[std::to_string(k)] = v;
    ordered_json comp = ordered_json::object();
    for (const auto& [k, v] : r.compilable_at) comp[std::to_string(k)] = v;
    j["pass_at"] = pass;
    j["compilable_at"] = comp;
    j["bleu"] = r.bleu;
    j["exact_match_rate"] = r.exact_match_rate;
    j["ed_all"] = mean_std_json(r.ed.all);
    j["ed_correct"] = mean_std_json(r.ed.correct);
    j["ed_top1"] = mean_std_json(r.ed.top1);
    ordered_json cfg;
    cfg["generator"] = r.generator;
    cfg["n_samples"] = r.config.n_samples;
    cfg["temperature"] = r.config.temperature;
    cfg["max_tokens"] = r.config.max_tokens;
    cfg["seed"] = r.seed;
    cfg["estimator"] = "unbiased 1 - C(n-c,k)/C(n,k), mean over pairs";
    cfg["bleu_aggregation"] = "mean over all samples";
    cfg["exact_match_aggregation"] = "mean over all samples";
    cfg["ed_unit"] = "unicode scalar value";
    cfg["ed_all_aggregation"] = "mean over all samples";
    cfg["std"] = "population";
    cfg["tokenizer_vocab_size"] = r.tokenizer_vocab_size;
    cfg["tokenizer_sha256"] = r.tokenizer_sha256;
    j["config"] = cfg;
    ordered_json limits = ordered_json::object();
    for (const auto& [id, lim] : r.judge_limits) limits[id] = {{"time_ms", lim.first}, {"memory_kib", lim.second}};
    j["judge_limits"] = limits;
    return j.dump(2) + "\n";
}

EvalReport parse_report_json(std::string_view text) {
    try {
        const json j = json::parse(text);
        EvalReport r;
        r.model_id = j.at("model_id").get<std::string>();
        r.n_pairs = j.at("n_pairs").get<std::size_t>();
        r.n_samples_per_pair = j.at("n_samples_per_pair").get<std::int64_t>();
        for (const auto& [k, v] : j.at("pass_at").items()) r.pass_at[std::stoll(k)] = v.get<double>();
        for (const auto& [k, v] : j.at("compilable_at").items()) r.compilable_at[std::stoll(k)] = v.get<double>();
        r.bleu = j.at("bleu").get<double>();
        r.exact_match_rate = j.at("exact_match_rate").get<double>();
        r.ed.all = mean_std_from(j.at("ed_all"));
        r.ed.correct = mean_std_from(j.at("ed_correct"));
        r.ed.top1 = mean_std_from(j.at("ed_top1"));
        const json& cfg = j.at("config");
        r.generator = cfg.at("generator").get<std::string>();
        r.config.n_samples = cfg.at("n_samples").get<std::int64_t>();
        r.config.temperature = cfg.at("temperature").get<double>();
        r.config.max_tokens = cfg.at("max_tokens").get<std::int64_t>();
        r.seed = cfg.at("seed").get<std::uint64_t>();
        r.tokenizer_vocab_size = cfg.at("tokenizer_vocab_size").get<std::size_t>();
        r.tokenizer_sha256 = cfg.at("tokenizer_sha256").get<std::string>();
        for (const auto& [id, lim] : j.at("judge_limits").items()) {
            r.judge_limits[id] = {lim.at("time_ms").get<std::int64_t>(), lim.at("memory_kib").get<std::int64_t>()};
        }
        return r;
    } catch (const json::exception& e) {
        throw Error(std::string("invalid report JSON: ") + e.what());
    }
}

std::string render_table(std::span<const EvalReport> reports) {
    const std::vector<std::string> header = {"Model", "Pass@1", "Pass@10", "Pass@100", "Compilable@1", "Compilable@10",
                                             "Compilable@100", "BLEU", "Exact Match", "ED All", "ED Correct", "ED Top-1"};
    std::vector<std::vector<std::string>> rows{header};
    for (const auto& r : reports) {
        rows.push_back({r.model_id, percent(lookup(r.pass_at, 1)), percent(lookup(r.pass_at, 10)),
                        percent(lookup(r.pass_at, 100)), percent(lookup(r.compilable_at, 1)),
                        percent(lookup(r.compilable_at, 10)), percent(lookup(r.compilable_at, 100)), fixed2(r.bleu),
                        percent(r.exact_match_rate), ed_cell(r.ed.all), ed_cell(r.ed.correct), ed_cell(r.ed.top1)});
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            if (c > 0) out << " | ";
            out << rows[r][c] << std::string(width[c] - rows[r][c].size(), ' ');
        }
        out << '\n';
        if (r == 0) {
            for (std::size_t c = 0; c < width.size(); ++c) {
                if (c > 0) out << "-+-";
                out << std::string(width[c], '-');
            }
            out << '\n';
        }
    }
    return out.str();
}

std::string grouped_csv(const GroupedPass& grouped) {
    std::ostringstream out;
    out << "ed_lo,ed_hi,mean_pass,n_pairs\n";
    for (const auto& b : grouped.buckets) {
        out << b.lo << ',' << b.hi << ',';
        if (b.mean_pass) out << json(*b.mean_pass).dump();
        out << ',' << b.n_pairs << '\n';
    }
    return out.str();
}

std::string scatter_csv(const ScatterData& data) {
    std::ostringstream out;
    out << "pair_id,sample_index,original_ed,generated_ed,pair_correct\n";
    for (const auto& p : data.points) {
        out << p.pair_id << ',' << p.sample_index << ',' << p.original_ed << ',' << p.generated_ed << ','
            << (p.pair_correct ? "true" : "false") << '\n';
    }
    return out.str();
}

}  // namespace minrepair::evalreport
