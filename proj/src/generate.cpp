#include "minrepair/generate.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "minrepair/error.hpp"
#include "minrepair/metrics.hpp"
#include "minrepair/sandbox.hpp"
#include "minrepair/util.hpp"

namespace minrepair::generate {

namespace {

// Characters inserted or substituted by gen_mutate.
constexpr std::u32string_view kMutationAlphabet =
    U" !\"#$%&'()*+,-./0123456789:;<=>?@ABCDEFGHIJKLMNOPQRSTUVWXYZ[\\]^_`abcdefghijklmnopqrstuvwxyz{|}~\n";

}  // namespace

void GeneratorConfig::validate() const {
    if (n_samples < 1) throw Error("generator: n_samples must be >= 1");
    if (!(temperature > 0.0)) throw Error("generator: temperature must be > 0");
    if (max_tokens < 1) throw Error("generator: max_tokens must be >= 1");
}

std::vector<Candidate> gen_copy(const corpus::CodePair& pair) {
    return {Candidate{pair.pair_id, 0, pair.wrong_source, "copy"}};
}

RetrievalIndex build_retrieval_index(std::span<const corpus::CodePair> train_pairs) {
    RetrievalIndex index;
    std::set<std::pair<std::string_view, std::string_view>> seen;
    for (const auto& p : train_pairs) {
        if (seen.emplace(p.problem_id, p.correct_source).second) index[p.problem_id].push_back(p.correct_source);
    }
    return index;
}

std::vector<Candidate> gen_retrieval(const corpus::CodePair& pair, const RetrievalIndex& index) {
    const auto it = index.find(pair.problem_id);
    if (it == index.end() || it->second.empty()) {
        throw Error("retrieval: no training program for problem " + pair.problem_id);
    }
    const std::u32string wrong = decode_utf8(pair.wrong_source);
    const std::string* best = nullptr;
    std::size_t best_ed = 0;
    for (const auto& program : it->second) {
        const std::size_t ed = metrics::edit_distance(wrong, decode_utf8(program));
        if (best == nullptr || ed < best_ed) {
            best = &program;
            best_ed = ed;
        }
    }
    return {Candidate{pair.pair_id, 0, *best, "retrieval"}};
}

std::vector<Candidate> gen_mutate(const corpus::CodePair& pair, const GeneratorConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(derive_seed(seed, pair.pair_id));
    const std::u32string base = decode_utf8(pair.correct_source);
    std::vector<Candidate> out;
    out.reserve(static_cast<std::size_t>(config.n_samples));
    out.push_back({pair.pair_id, 0, pair.correct_source, "mutate"});
    for (std::int64_t i = 1; i < config.n_samples; ++i) {
        std::u32string text = base;
        const auto edits = rng.below(4);
        for (std::uint64_t e = 0; e < edits; ++e) {
            const auto op = text.empty() ? 0 : rng.below(3);
            const char32_t c = kMutationAlphabet[rng.below(kMutationAlphabet.size())];
            if (op == 0) {
                text.insert(text.begin() + static_cast<std::ptrdiff_t>(rng.below(text.size() + 1)), c);
            } else if (op == 1) {
                text.erase(rng.below(text.size()), 1);
            } else {
                text[rng.below(text.size())] = c;
            }
        }
        out.push_back({pair.pair_id, i, encode_utf8(text), "mutate"});
    }
    return out;
}

ExternalRun run_external(const std::string& command, std::span<const corpus::CodePair> pairs,
                         const GeneratorConfig& config, const ExternalOptions& options) {
    config.validate();
    ExternalRun run;
    sandbox::ChildProcess child(command);
    using Clock = sandbox::ChildProcess::Clock;
    const auto n = config.n_samples;

    for (const auto& pair : pairs) {
        const auto deadline = Clock::now() + options.per_pair_timeout;
        ordered_json request;
        request["type"] = "generate";
        request["pair_id"] = pair.pair_id;
        request["wrong"] = pair.wrong_source;
        request["n_samples"] = n;
        request["temperature"] = config.temperature;
        request["max_tokens"] = config.max_tokens;
        try {
            child.write_all(request.dump() + "\n", deadline);
        } catch (const InfraError& e) {
            throw ProtocolError(pair.pair_id, e.what());
        }

        std::vector<Candidate> got;
        std::set<std::int64_t> indices;
        std::optional<std::string> failure;
        for (;;) {
            std::optional<std::string> line;
            try {
                line = child.read_line(deadline);
            } catch (const InfraError& e) {
                child.kill();
                throw ProtocolError(pair.pair_id, e.what());
            }
            if (!line) {
                const int status = child.wait(Clock::now() + std::chrono::seconds(5));
                throw ProtocolError(pair.pair_id, "generator exited (status " + std::to_string(status) +
                                                      ") before finishing the pair");
            }
            json msg;
            try {
                msg = json::parse(*line);
            } catch (const json::parse_error&) {
                throw ProtocolError(pair.pair_id, "malformed line: " + line->substr(0, 200));
            }
            if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string() || !msg.contains("pair_id") ||
                !msg["pair_id"].is_string()) {
                throw ProtocolError(pair.pair_id, "line lacks string 'type'/'pair_id': " + line->substr(0, 200));
            }
            if (msg["pair_id"].get<std::string>() != pair.pair_id) {
                throw ProtocolError(pair.pair_id, "response for unexpected pair " + msg["pair_id"].get<std::string>());
            }
            const std::string type = msg["type"].get<std::string>();
            if (type == "done") break;
            if (type == "error") {
                failure = msg.value("message", std::string("generator reported an error"));
                break;
            }
            if (type != "candidate") throw ProtocolError(pair.pair_id, "unknown message type '" + type + "'");
            if (!msg.contains("sample_index") || !msg["sample_index"].is_number_integer() || !msg.contains("source") ||
                !msg["source"].is_string()) {
                throw ProtocolError(pair.pair_id, "candidate lacks integer 'sample_index' or string 'source'");
            }
            const auto idx = msg["sample_index"].get<std::int64_t>();
            if (idx < 0 || idx >= n) throw ProtocolError(pair.pair_id, "sample_index " + std::to_string(idx) + " out of range");
            if (!indices.insert(idx).second) throw ProtocolError(pair.pair_id, "duplicate sample_index " + std::to_string(idx));
            got.push_back({pair.pair_id, idx, msg["source"].get<std::string>(), options.generator_id});
        }
        if (failure) {
            run.errors.push_back({pair.pair_id, *failure});
        } else if (static_cast<std::int64_t>(got.size()) != n) {
            run.errors.push_back({pair.pair_id, "expected " + std::to_string(n) + " samples, got " + std::to_string(got.size())});
        } else {
            std::sort(got.begin(), got.end(), [](const Candidate& a, const Candidate& b) { return a.sample_index < b.sample_index; });
            run.candidates.insert(run.candidates.end(), std::make_move_iterator(got.begin()), std::make_move_iterator(got.end()));
        }
    }
    child.close_stdin();
    const int status = child.wait(Clock::now() + std::chrono::seconds(10));
    if (status != 0) {
        throw ProtocolError(pairs.empty() ? std::string("<none>") : pairs.back().pair_id,
                            "generator exited with status " + std::to_string(status));
    }
    return run;
}

std::vector<Candidate> read_candidates(std::istream& in) {
    std::vector<Candidate> out;
    std::set<std::pair<std::string, std::int64_t>> seen;
    for_each_jsonl(in, [&](std::size_t line, const json& obj) {
        Candidate c;
        c.pair_id = require_string(obj, "pair_id", line);
        c.sample_index = require_int(obj, "sample_index", line);
        if (c.sample_index < 0) throw IngestError(line, "sample_index must be nonnegative");
        c.source = require_string(obj, "source", line);
        c.generator_id = require_string(obj, "generator_id", line);
        if (!seen.emplace(c.pair_id, c.sample_index).second) {
            throw IngestError(line, "duplicate candidate (" + c.pair_id + ", " + std::to_string(c.sample_index) + ")");
        }
        out.push_back(std::move(c));
    });
    return out;
}

std::vector<Candidate> load_candidates(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open candidates file " + path);
    return read_candidates(in);
}

void write_candidates(std::ostream& out, std::span<const Candidate> candidates) {
    for (const auto& c : candidates) {
        ordered_json j;
        j["pair_id"] = c.pair_id;
        j["sample_index"] = c.sample_index;
        j["source"] = c.source;
        j["generator_id"] = c.generator_id;
        out << j.dump() << '\n';
    }
}

}  // namespace minrepair::generate
