#include "minrepair/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "minrepair/corpus.hpp"
#include "minrepair/error.hpp"
#include "minrepair/evalreport.hpp"
#include "minrepair/generate.hpp"
#include "minrepair/judge.hpp"
#include "minrepair/manifest.hpp"
#include "minrepair/suggest.hpp"
#include "minrepair/tokenize.hpp"

namespace minrepair::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string in;
    std::vector<std::string> inputs;
    std::string out;
    std::string out_dir;
    std::string tokenizer;
    std::size_t max_len = 256;
    std::uint64_t seed = 0;
    std::vector<double> ratios{0.90, 0.05, 0.05};
    std::size_t vocab_size = 8192;
    bool count_only = false;

    std::string generator;
    std::string pairs;
    std::string train;
    std::int64_t n_samples = 100;
    double temperature = 0.7;
    std::int64_t max_tokens = 256;
    double timeout_s = 120.0;

    std::string candidates;
    std::string verdicts;
    std::string problems;
    std::size_t jobs = 0;
    std::string python = "/usr/bin/python3";

    std::string model_id;
    std::size_t bucket_width = 10;

    std::string wrong;
    std::string problem;
    std::string fallback;

    std::vector<std::string> reports;
    std::string format = "table";
};

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    return in;
}

std::vector<corpus::SubmissionRecord> load_submissions(const std::string& path) {
    auto in = open_in(path);
    try {
        return corpus::read_submissions(in);
    } catch (const IngestError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::vector<corpus::CodePair> load_pairs(const std::string& path) {
    try {
        return corpus::load_pairs(path);
    } catch (const IngestError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::string problems_root(const Options& o) {
    if (!o.problems.empty()) return o.problems;
    if (const char* env = std::getenv("MINREPAIR_PROBLEMS_DIR"); env != nullptr && *env != '\0') return env;
    throw UsageError("no problems directory: pass --problems or set MINREPAIR_PROBLEMS_DIR");
}

judge::Judge make_judge(const Options& o) {
    judge::JudgeOptions jo;
    jo.python = o.python;
    return judge::Judge(jo);
}

generate::GeneratorConfig generator_config(const Options& o) {
    generate::GeneratorConfig cfg;
    cfg.n_samples = o.n_samples;
    cfg.temperature = o.temperature;
    cfg.max_tokens = o.max_tokens;
    cfg.validate();
    return cfg;
}

struct Source {
    evalreport::CandidateSource fn;
    std::string name;  // generator spec as given
    std::vector<fs::path> inputs;
    std::shared_ptr<std::vector<generate::PairError>> errors = std::make_shared<std::vector<generate::PairError>>();
};

// Builds the candidate source named by --generator.
// With strict set, a per-pair external generator error aborts the run;
// otherwise it is recorded in Source::errors and the pair is skipped.
Source make_source(const Options& o, std::ostream& err, bool strict, bool allow_mutate = true) {
    const std::string& g = o.generator;
    const auto cfg = generator_config(o);
    Source s;
    s.name = g;
    if (g == "copy") {
        s.fn = [](std::span<const corpus::CodePair> pairs) {
            std::vector<generate::Candidate> out;
            for (const auto& p : pairs) {
                auto c = generate::gen_copy(p);
                out.insert(out.end(), c.begin(), c.end());
            }
            return out;
        };
    } else if (g == "retrieval") {
        if (o.train.empty()) throw UsageError("--generator retrieval needs --train");
        auto index = std::make_shared<generate::RetrievalIndex>(generate::build_retrieval_index(load_pairs(o.train)));
        s.inputs.push_back(o.train);
        s.fn = [index](std::span<const corpus::CodePair> pairs) {
            std::vector<generate::Candidate> out;
            for (const auto& p : pairs) {
                auto c = generate::gen_retrieval(p, *index);
                out.insert(out.end(), c.begin(), c.end());
            }
            return out;
        };
    } else if (g == "mutate") {
        if (!allow_mutate) throw UsageError("--generator mutate needs the correct program and is not available here");
        const auto seed = o.seed;
        s.fn = [cfg, seed](std::span<const corpus::CodePair> pairs) {
            std::vector<generate::Candidate> out;
            for (const auto& p : pairs) {
                auto c = generate::gen_mutate(p, cfg, seed);
                out.insert(out.end(), c.begin(), c.end());
            }
            return out;
        };
    } else if (g.rfind("external:", 0) == 0) {
        const std::string command = g.substr(9);
        if (command.empty()) throw UsageError("--generator external:<command> needs a command");
        generate::ExternalOptions eo;
        eo.per_pair_timeout = std::chrono::milliseconds(static_cast<std::int64_t>(o.timeout_s * 1000));
        s.fn = [command, cfg, eo, strict, errors = s.errors, &err](std::span<const corpus::CodePair> pairs) {
            auto run = generate::run_external(command, pairs, cfg, eo);
            for (const auto& e : run.errors) err << "generator error: pair " << e.pair_id << ": " << e.message << "\n";
            if (strict && !run.errors.empty()) throw ProtocolError(run.errors.front().pair_id, run.errors.front().message);
            errors->insert(errors->end(), run.errors.begin(), run.errors.end());
            return run.candidates;
        };
    } else if (g.rfind("replay:", 0) == 0) {
        const std::string path = g.substr(7);
        if (path.empty()) throw UsageError("--generator replay:<file> needs a file");
        auto all = std::make_shared<std::vector<generate::Candidate>>();
        try {
            *all = generate::load_candidates(path);
        } catch (const IngestError& e) {
            throw ConfigError(path + ": " + e.what());
        }
        s.inputs.push_back(path);
        s.fn = [all](std::span<const corpus::CodePair> pairs) {
            std::set<std::string> wanted;
            for (const auto& p : pairs) wanted.insert(p.pair_id);
            std::vector<generate::Candidate> out;
            for (const auto& c : *all) {
                if (wanted.contains(c.pair_id)) out.push_back(c);
            }
            return out;
        };
    } else {
        throw UsageError("unknown generator '" + g + "' (copy|retrieval|mutate|external:<cmd>|replay:<file>)");
    }
    return s;
}

void save_text(const std::string& path, const std::string& text) { write_file(path, text); }

template <typename Fn>
void write_stream(const std::string& path, Fn&& fn) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path);
    fn(out);
    if (!out) throw ConfigError("write failed: " + path);
}

ordered_json config_of(const Options& o, std::initializer_list<const char*> keys) {
    const json all = {{"in", o.in},
                      {"inputs", o.inputs},
                      {"out", o.out},
                      {"out_dir", o.out_dir},
                      {"tokenizer", o.tokenizer},
                      {"max_len", o.max_len},
                      {"seed", o.seed},
                      {"ratios", o.ratios},
                      {"vocab_size", o.vocab_size},
                      {"generator", o.generator},
                      {"pairs", o.pairs},
                      {"train", o.train},
                      {"n_samples", o.n_samples},
                      {"temperature", o.temperature},
                      {"max_tokens", o.max_tokens},
                      {"candidates", o.candidates},
                      {"verdicts", o.verdicts},
                      {"problems", o.problems},
                      {"model_id", o.model_id},
                      {"bucket_width", o.bucket_width},
                      {"wrong", o.wrong},
                      {"problem", o.problem},
                      {"fallback", o.fallback}};
    ordered_json cfg = ordered_json::object();
    for (const char* k : keys) cfg[k] = all.at(k);
    return cfg;
}

void print_stats(std::ostream& out, const corpus::CorpusStats& s) {
    ordered_json j;
    j["count"] = s.count;
    j["mean_ed"] = s.mean_ed ? json(*s.mean_ed) : json(nullptr);
    j["std_ed"] = s.std_ed ? json(*s.std_ed) : json(nullptr);
    out << j.dump() << "\n";
}

std::map<std::string, judge::ProblemSpec> problems_for(const std::string& root, std::span<const corpus::CodePair> pairs) {
    std::map<std::string, judge::ProblemSpec> problems;
    for (const auto& p : pairs) {
        if (!problems.contains(p.problem_id)) problems.emplace(p.problem_id, judge::load_problem(root, p.problem_id));
    }
    return problems;
}

int run_suggest(const Options& o, RunManifest& manifest, std::ostream& out, std::ostream& err) {
    const std::string wrong = read_file(o.wrong);
    manifest.inputs.push_back(o.wrong);
    const std::string root = problems_root(o);
    const auto problem = judge::load_problem(root, o.problem);
    const std::map<std::string, judge::ProblemSpec> problems{{o.problem, problem}};
    const auto pair = corpus::make_pair(o.problem, "", wrong, "");
    const std::vector<corpus::CodePair> pairs{pair};
    const auto judge = make_judge(o);

    const auto judge_all = [&](std::vector<generate::Candidate> cands) {
        for (auto& c : cands) c.pair_id = pair.pair_id;
        const std::map<std::string, std::string> problem_of{{pair.pair_id, o.problem}};
        const auto entries = judge::judge_batch(judge, cands, problem_of, problems, o.jobs);
        std::vector<suggest::JudgedCandidate> judged;
        for (const auto& e : entries) {
            if (!e.result) throw InfraError("judging candidate " + std::to_string(cands[e.candidate_index].sample_index) + ": " + e.error);
            judged.push_back({cands[e.candidate_index], *e.result});
        }
        return judged;
    };

    std::vector<generate::Candidate> cands;
    if (o.generator.rfind("replay:", 0) == 0) {
        // A replay file for one wrong program: take every candidate in it.
        const std::string path = o.generator.substr(7);
        try {
            cands = generate::load_candidates(path);
        } catch (const IngestError& e) {
            throw ConfigError(path + ": " + e.what());
        }
        manifest.inputs.push_back(path);
    } else {
        const auto source = make_source(o, err, true, false);
        manifest.inputs.insert(manifest.inputs.end(), source.inputs.begin(), source.inputs.end());
        cands = source.fn(pairs);
    }
    if (cands.empty()) throw Error("generator produced no candidates");

    std::optional<suggest::Suggestion> result;
    try {
        result = suggest::select_minimal(wrong, judge_all(cands));
    } catch (const suggest::NoCorrectCandidate& e) {
        if (o.fallback != "retrieval") {
            err << "NoCorrectCandidate: " << e.what() << "\n";
            for (const auto& d : e.compilable()) {
                err << "  compilable candidate sample " << d.candidate.sample_index << " (" << to_string(d.verdict)
                    << ", edit distance " << d.edit_distance << ")\n";
            }
            return kExitDomain;
        }
        err << "NoCorrectCandidate: " << e.what() << "; falling back to retrieval\n";
        const auto index = generate::build_retrieval_index(load_pairs(o.train));
        manifest.inputs.push_back(o.train);
        result = suggest::select_minimal(wrong, judge_all(generate::gen_retrieval(pair, index)));
    }
    const std::string text = suggest::suggestion_json(*result);
    if (o.out.empty()) {
        out << text;
    } else {
        save_text(o.out, text);
        manifest.outputs.push_back(o.out);
    }
    return kExitOk;
}

// The most specific subcommand named on the command line, for help output.
const CLI::App* deepest_parsed(const CLI::App* app) {
    for (const CLI::App* sub : app->get_subcommands()) return deepest_parsed(sub);
    return app;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Minimal-edit program repair harness: mine code pairs, generate and judge repair candidates, report metrics."};
    app.name(args.empty() ? "minrepair" : args.front());
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML/INI file supplying option values (sections named after subcommands)");
    const std::string problems_help = "Problems root (default: $MINREPAIR_PROBLEMS_DIR)";

    auto* corpus_cmd = app.add_subcommand("corpus", "Mine, filter, deduplicate, split, and summarize code pairs");
    corpus_cmd->require_subcommand(1);
    auto* pair_cmd = corpus_cmd->add_subcommand("pair", "Pair wrong submissions with the next accepted one");
    pair_cmd->add_option("--in", o.in, "Submissions JSONL")->required();
    pair_cmd->add_option("--out", o.out, "Pairs JSONL")->required();
    auto* filter_cmd = corpus_cmd->add_subcommand("filter", "Keep pairs with 0 < tokens < max-len on both sides");
    filter_cmd->add_option("--in", o.in, "Pairs JSONL")->required();
    filter_cmd->add_option("--out", o.out, "Pairs JSONL")->required();
    filter_cmd->add_option("--tokenizer", o.tokenizer, "Tokenizer model JSON")->required();
    filter_cmd->add_option("--max-len", o.max_len, "Exclusive token-length bound")->capture_default_str();
    auto* dedupe_cmd = corpus_cmd->add_subcommand("dedupe", "Drop exact duplicate (wrong, correct, problem) pairs");
    dedupe_cmd->add_option("--in", o.in, "Pairs JSONL")->required();
    dedupe_cmd->add_option("--out", o.out, "Pairs JSONL")->required();
    auto* split_cmd = corpus_cmd->add_subcommand("split", "Seeded train/valid/test split");
    split_cmd->add_option("--in", o.in, "Pairs JSONL")->required();
    split_cmd->add_option("--out-dir", o.out_dir, "Directory for train/valid/test.jsonl and split.json")->required();
    split_cmd->add_option("--seed", o.seed, "Shuffle seed")->capture_default_str();
    split_cmd->add_option("--ratios", o.ratios, "train valid test ratios")->expected(3)->capture_default_str();
    auto* stats_cmd = corpus_cmd->add_subcommand("stats", "Count and edit-distance mean/std of a pairs file");
    stats_cmd->add_option("--in", o.in, "Pairs JSONL")->required();

    auto* tok_cmd = app.add_subcommand("tokenizer", "Train or apply the BPE tokenizer");
    tok_cmd->require_subcommand(1);
    auto* train_cmd = tok_cmd->add_subcommand("train", "Train BPE on the wrong and correct programs of pairs files");
    train_cmd->add_option("--in", o.inputs, "Pairs JSONL file(s)")->required();
    train_cmd->add_option("--vocab-size", o.vocab_size, "Target vocabulary size (>= 256)")->capture_default_str();
    train_cmd->add_option("--out", o.out, "Model JSON")->required();
    auto* encode_cmd = tok_cmd->add_subcommand("encode", "Print the token ids of a file");
    encode_cmd->add_option("--model", o.tokenizer, "Model JSON")->required();
    encode_cmd->add_option("--in", o.in, "Text file")->required();
    encode_cmd->add_flag("--count", o.count_only, "Print only the token count");

    const auto add_generator_options = [&](CLI::App* cmd, bool required) {
        auto* g = cmd->add_option("--generator", o.generator, "copy|retrieval|mutate|external:<cmd>|replay:<file>");
        if (required) g->required();
        cmd->add_option("--train", o.train, "Train pairs JSONL (retrieval index)");
        cmd->add_option("--n-samples", o.n_samples, "Samples per pair")->capture_default_str();
        cmd->add_option("--temperature", o.temperature, "Sampling temperature passed to external generators")->capture_default_str();
        cmd->add_option("--max-tokens", o.max_tokens, "Token budget passed to external generators")->capture_default_str();
        cmd->add_option("--seed", o.seed, "Seed for mutate")->capture_default_str();
        cmd->add_option("--timeout", o.timeout_s, "Seconds allowed per pair for external generators")->capture_default_str();
    };
    const auto add_judge_options = [&](CLI::App* cmd) {
        cmd->add_option("--problems", o.problems, problems_help);
        cmd->add_option("--jobs", o.jobs, "Judge worker count (0: one per CPU)");
        cmd->add_option("--python", o.python, "Python 3 interpreter")->capture_default_str();
    };

    auto* gen_cmd = app.add_subcommand("generate", "Produce repair candidates for a pairs file");
    add_generator_options(gen_cmd, true);
    gen_cmd->add_option("--pairs", o.pairs, "Pairs JSONL")->required();
    gen_cmd->add_option("--out", o.out, "Candidates JSONL")->required();

    auto* judge_cmd = app.add_subcommand("judge", "Judge candidates");
    judge_cmd->require_subcommand(1);
    auto* judge_run_cmd = judge_cmd->add_subcommand("run", "Judge a candidates file against problem test cases");
    judge_run_cmd->add_option("--candidates", o.candidates, "Candidates JSONL")->required();
    judge_run_cmd->add_option("--pairs", o.pairs, "Pairs JSONL (maps pair_id to problem)")->required();
    judge_run_cmd->add_option("--out", o.out, "Verdicts JSONL")->required();
    add_judge_options(judge_run_cmd);

    auto* eval_cmd = app.add_subcommand("evaluate", "Generate, judge, and report metrics for a pairs file");
    add_generator_options(eval_cmd, true);
    add_judge_options(eval_cmd);
    eval_cmd->add_option("--pairs", o.pairs, "Pairs JSONL (usually the test split)")->required();
    eval_cmd->add_option("--tokenizer", o.tokenizer, "Tokenizer model for BLEU (default: byte level)");
    eval_cmd->add_option("--verdicts", o.verdicts, "Reuse a verdicts file instead of judging");
    eval_cmd->add_option("--model-id", o.model_id, "Row label (default: generator)");
    eval_cmd->add_option("--bucket-width", o.bucket_width, "Edit-distance bucket width for grouped pass rates")->capture_default_str();
    eval_cmd->add_option("--out-dir", o.out_dir, "Output directory")->required();

    auto* suggest_cmd = app.add_subcommand("suggest", "Suggest the accepted candidate closest to a wrong program");
    suggest_cmd->add_option("--wrong", o.wrong, "Wrong program file")->required();
    suggest_cmd->add_option("--problem", o.problem, "Problem id")->required();
    add_generator_options(suggest_cmd, true);
    add_judge_options(suggest_cmd);
    suggest_cmd->add_option("--fallback", o.fallback, "Fallback when nothing is accepted")->check(CLI::IsMember({"retrieval"}));
    suggest_cmd->add_option("--out", o.out, "Suggestion JSON (default: stdout)");

    auto* report_cmd = app.add_subcommand("report", "Render reports");
    report_cmd->require_subcommand(1);
    auto* render_cmd = report_cmd->add_subcommand("render", "Render report JSON files as a results table");
    render_cmd->add_option("--report", o.reports, "Report JSON file(s)")->required();
    render_cmd->add_option("--format", o.format, "table|json")->check(CLI::IsMember({"table", "json"}))->capture_default_str();

    std::vector<std::string> argv_rest(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(argv_rest.begin(), argv_rest.end());
    try {
        app.parse(argv_rest);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n\n" << deepest_parsed(&app)->help();
        return kExitUsage;
    }

    RunManifest manifest;
    manifest.command_line = args;
    std::string manifest_path;

    try {
        if (*pair_cmd) {
            auto pairs = corpus::pair_submissions(load_submissions(o.in));
            corpus::save_pairs(o.out, pairs);
            manifest.config = config_of(o, {"in", "out"});
            manifest.inputs = {o.in};
            manifest.outputs = {o.out};
            manifest_path = o.out + ".manifest.json";
            err << "pairs: " << pairs.size() << "\n";
        } else if (*filter_cmd) {
            const auto model = tokenize::BpeModel::load(o.tokenizer);
            const auto pairs = load_pairs(o.in);
            const auto kept = corpus::filter_pairs(pairs, model, o.max_len);
            corpus::save_pairs(o.out, kept);
            manifest.config = config_of(o, {"in", "out", "tokenizer", "max_len"});
            manifest.inputs = {o.in, o.tokenizer};
            manifest.outputs = {o.out};
            manifest_path = o.out + ".manifest.json";
            err << "kept " << kept.size() << " of " << pairs.size() << " pairs\n";
        } else if (*dedupe_cmd) {
            const auto pairs = load_pairs(o.in);
            const auto kept = corpus::dedupe_pairs(pairs);
            corpus::save_pairs(o.out, kept);
            manifest.config = config_of(o, {"in", "out"});
            manifest.inputs = {o.in};
            manifest.outputs = {o.out};
            manifest_path = o.out + ".manifest.json";
            err << "kept " << kept.size() << " of " << pairs.size() << " pairs\n";
        } else if (*split_cmd) {
            err << "seed: " << o.seed << "\n";
            const auto pairs = load_pairs(o.in);
            const auto split = corpus::split_pairs(pairs, o.seed, {o.ratios[0], o.ratios[1], o.ratios[2]});
            fs::create_directories(o.out_dir);
            const fs::path dir = o.out_dir;
            corpus::save_pairs((dir / "train.jsonl").string(), split.train);
            corpus::save_pairs((dir / "valid.jsonl").string(), split.valid);
            corpus::save_pairs((dir / "test.jsonl").string(), split.test);
            save_text((dir / "split.json").string(), corpus::split_manifest_json(split));
            manifest.config = config_of(o, {"in", "out_dir", "seed", "ratios"});
            manifest.inputs = {o.in};
            manifest.outputs = {dir / "train.jsonl", dir / "valid.jsonl", dir / "test.jsonl", dir / "split.json"};
            manifest.seeds = {o.seed};
            manifest_path = (dir / "manifest.json").string();
            err << "train " << split.train.size() << ", valid " << split.valid.size() << ", test " << split.test.size() << "\n";
        } else if (*stats_cmd) {
            print_stats(out, corpus::corpus_stats(load_pairs(o.in)));
        } else if (*train_cmd) {
            std::vector<std::string> texts;
            for (const auto& path : o.inputs) {
                for (auto& p : load_pairs(path)) {
                    texts.push_back(std::move(p.wrong_source));
                    texts.push_back(std::move(p.correct_source));
                }
            }
            const auto model = tokenize::train_bpe(texts, o.vocab_size);
            model.save(o.out);
            manifest.config = config_of(o, {"inputs", "vocab_size", "out"});
            manifest.inputs.assign(o.inputs.begin(), o.inputs.end());
            manifest.outputs = {o.out};
            manifest_path = o.out + ".manifest.json";
            err << "vocab size " << model.vocab_size() << " (" << model.merges().size() << " merges)\n";
        } else if (*encode_cmd) {
            const auto model = tokenize::BpeModel::load(o.tokenizer);
            const auto seq = model.encode(read_file(o.in));
            if (o.count_only) {
                out << seq.size() << "\n";
            } else {
                for (std::size_t i = 0; i < seq.size(); ++i) out << (i ? " " : "") << seq[i];
                out << "\n";
            }
        } else if (*gen_cmd) {
            err << "seed: " << o.seed << "\n";
            const auto pairs = load_pairs(o.pairs);
            const auto source = make_source(o, err, false);
            const auto cands = source.fn(pairs);
            write_stream(o.out, [&](std::ostream& s) { generate::write_candidates(s, cands); });
            manifest.config = config_of(o, {"generator", "pairs", "train", "n_samples", "temperature", "max_tokens", "seed", "out"});
            manifest.inputs = {o.pairs};
            manifest.inputs.insert(manifest.inputs.end(), source.inputs.begin(), source.inputs.end());
            manifest.outputs = {o.out};
            manifest.seeds = {o.seed};
            manifest_path = o.out + ".manifest.json";
            err << "candidates: " << cands.size() << "\n";
            if (!source.errors->empty()) {
                manifest.write(manifest_path);
                err << "error: " << source.errors->size() << " pair(s) failed\n";
                return kExitDomain;
            }
        } else if (*judge_run_cmd) {
            const auto pairs = load_pairs(o.pairs);
            std::vector<generate::Candidate> cands;
            try {
                cands = generate::load_candidates(o.candidates);
            } catch (const IngestError& e) {
                throw ConfigError(o.candidates + ": " + e.what());
            }
            const auto problems = problems_for(problems_root(o), pairs);
            std::map<std::string, std::string> problem_of;
            for (const auto& p : pairs) problem_of[p.pair_id] = p.problem_id;
            judge::BatchStats stats;
            const auto entries = judge::judge_batch(make_judge(o), cands, problem_of, problems, o.jobs, nullptr, &stats);
            std::vector<judge::VerdictRecord> records;
            std::size_t failures = 0;
            for (const auto& e : entries) {
                const auto& c = cands[e.candidate_index];
                if (!e.result) {
                    ++failures;
                    err << "error: " << c.pair_id << "/" << c.sample_index << ": " << e.error << "\n";
                    continue;
                }
                records.push_back(judge::to_record(c.pair_id, c.sample_index, *e.result));
            }
            write_stream(o.out, [&](std::ostream& s) { judge::write_verdicts(s, records); });
            manifest.config = config_of(o, {"candidates", "pairs", "problems", "out"});
            manifest.inputs = {o.candidates, o.pairs};
            manifest.outputs = {o.out};
            manifest_path = o.out + ".manifest.json";
            err << "judged " << records.size() << " candidates (" << stats.executions << " executions)\n";
            if (failures > 0) {
                manifest.write(manifest_path);
                return kExitDomain;
            }
        } else if (*eval_cmd) {
            err << "seed: " << o.seed << "\n";
            const auto pairs = load_pairs(o.pairs);
            const auto problems = problems_for(problems_root(o), pairs);
            std::optional<tokenize::BpeModel> model;
            if (!o.tokenizer.empty()) model = tokenize::BpeModel::load(o.tokenizer);
            auto source = make_source(o, err, true);

            evalreport::EvaluateOptions eo;
            eo.generator = o.generator;
            eo.config = generator_config(o);
            eo.seed = o.seed;
            if (o.generator.rfind("replay:", 0) == 0) {
                // Report the generator that produced the replayed candidates so
                // a replayed run reproduces the original report.
                auto cands = std::make_shared<std::vector<generate::Candidate>>(source.fn(pairs));
                std::set<std::string> ids;
                for (const auto& c : *cands) ids.insert(c.generator_id);
                if (ids.size() == 1) eo.generator = *ids.begin();
                if (!pairs.empty()) eo.config.n_samples = static_cast<std::int64_t>(cands->size() / pairs.size());
                source.fn = [cands](std::span<const corpus::CodePair>) { return *cands; };
            }
            eo.model_id = o.model_id.empty() ? eo.generator : o.model_id;
            eo.jobs = o.jobs;
            eo.tokenizer = model ? &*model : nullptr;

            const fs::path dir = o.out_dir;
            fs::create_directories(dir);
            manifest.config = config_of(o, {"generator", "pairs", "train", "n_samples", "temperature", "max_tokens", "seed",
                                            "problems", "tokenizer", "verdicts", "model_id", "bucket_width"});
            manifest.inputs = {o.pairs};
            if (!o.tokenizer.empty()) manifest.inputs.push_back(o.tokenizer);
            manifest.inputs.insert(manifest.inputs.end(), source.inputs.begin(), source.inputs.end());
            manifest.seeds = {o.seed};
            manifest_path = (dir / "manifest.json").string();

            evalreport::Evaluation ev;
            try {
                if (!o.verdicts.empty()) {
                    auto in = open_in(o.verdicts);
                    const auto verdicts = judge::read_verdicts(in);
                    manifest.inputs.push_back(o.verdicts);
                    ev = evalreport::aggregate(pairs, source.fn(pairs), verdicts, problems, eo);
                } else {
                    judge::JudgeCache cache;
                    eo.cache = &cache;
                    ev = evalreport::evaluate(pairs, source.fn, make_judge(o), problems, eo);
                }
            } catch (const evalreport::EvaluationAborted& e) {
                save_text((dir / "partial.json").string(), e.manifest_json());
                manifest.outputs = {dir / "partial.json"};
                manifest.write(manifest_path);
                throw;
            }
            const auto grouped = evalreport::group_pass_by_original_ed(ev.pairs, o.bucket_width);
            const auto points = evalreport::scatter(ev.outcomes, ev.pairs);
            save_text((dir / "report.json").string(), evalreport::report_json(ev.report));
            save_text((dir / "report.txt").string(), evalreport::render_table(std::span(&ev.report, 1)));
            write_stream((dir / "candidates.jsonl").string(), [&](std::ostream& s) { generate::write_candidates(s, ev.candidates); });
            write_stream((dir / "verdicts.jsonl").string(), [&](std::ostream& s) { judge::write_verdicts(s, ev.verdicts); });
            save_text((dir / "grouped_pass.csv").string(), evalreport::grouped_csv(grouped));
            save_text((dir / "scatter.csv").string(), evalreport::scatter_csv(points));
            manifest.outputs = {dir / "report.json", dir / "report.txt", dir / "candidates.jsonl", dir / "verdicts.jsonl",
                                dir / "grouped_pass.csv", dir / "scatter.csv"};
            out << evalreport::render_table(std::span(&ev.report, 1));
        } else if (*suggest_cmd) {
            const int rc = run_suggest(o, manifest, out, err);
            if (rc != kExitOk) return rc;
            manifest.config = config_of(o, {"wrong", "problem", "generator", "train", "n_samples", "seed", "fallback", "out"});
            if (!o.out.empty()) manifest_path = o.out + ".manifest.json";
        } else if (*render_cmd) {
            std::vector<evalreport::EvalReport> reports;
            for (const auto& path : o.reports) reports.push_back(evalreport::parse_report_json(read_file(path)));
            if (o.format == "json") {
                for (const auto& r : reports) out << evalreport::report_json(r);
            } else {
                out << evalreport::render_table(reports);
            }
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomain;
    }

    if (!manifest_path.empty()) manifest.write(manifest_path);
    return kExitOk;
}

int cli_dispatch(int argc, char** argv, std::ostream& out, std::ostream& err) {
    return cli_dispatch(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace minrepair::cli
