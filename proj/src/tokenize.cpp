#include "minrepair/tokenize.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <set>
#include <unordered_map>

#include "minrepair/error.hpp"
#include "minrepair/util.hpp"

namespace minrepair::tokenize {

namespace {

using Pair = std::pair<std::uint32_t, std::uint32_t>;

struct PairHash {
    std::size_t operator()(const Pair& p) const noexcept {
        return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(p.first) << 32) | p.second);
    }
};

std::vector<std::string> byte_vocab() {
    std::vector<std::string> vocab;
    vocab.reserve(256);
    for (int b = 0; b < 256; ++b) vocab.emplace_back(1, static_cast<char>(b));
    return vocab;
}

// Replaces every non-overlapping occurrence of (left, right), scanning left to right.
void merge_in_place(std::vector<std::uint32_t>& seq, Pair pair, std::uint32_t merged) {
    std::size_t out = 0;
    for (std::size_t i = 0; i < seq.size();) {
        if (i + 1 < seq.size() && seq[i] == pair.first && seq[i + 1] == pair.second) {
            seq[out++] = merged;
            i += 2;
        } else {
            seq[out++] = seq[i++];
        }
    }
    seq.resize(out);
}

}  // namespace

BpeModel::BpeModel() : vocab_(byte_vocab()) {}

BpeModel::BpeModel(std::vector<std::string> vocab, std::vector<MergeRule> merges)
    : vocab_(std::move(vocab)), merges_(std::move(merges)) {
    if (vocab_.size() < 256) throw Error("tokenizer: vocab must contain the 256 byte tokens");
    for (std::size_t b = 0; b < 256; ++b) {
        if (vocab_[b].size() != 1 || static_cast<unsigned char>(vocab_[b][0]) != b) {
            throw Error("tokenizer: vocab[" + std::to_string(b) + "] is not byte " + std::to_string(b));
        }
    }
    if (vocab_.size() != 256 + merges_.size()) throw Error("tokenizer: vocab size must equal 256 + merges");
    for (std::size_t r = 0; r < merges_.size(); ++r) {
        const MergeRule& m = merges_[r];
        if (m.merged != 256 + r) throw Error("tokenizer: merge " + std::to_string(r) + " must produce id " + std::to_string(256 + r));
        if (m.left >= m.merged || m.right >= m.merged) throw Error("tokenizer: merge " + std::to_string(r) + " refers to a later token");
        if (vocab_[m.merged] != vocab_[m.left] + vocab_[m.right]) {
            throw Error("tokenizer: merge " + std::to_string(r) + " output does not match its inputs");
        }
        if (!ranks_.emplace(Pair{m.left, m.right}, std::pair{r, m.merged}).second) {
            throw Error("tokenizer: duplicate merge rule " + std::to_string(r));
        }
    }
}

TokenSeq BpeModel::encode(std::string_view text) const {
    TokenSeq seq;
    seq.reserve(text.size());
    for (const char c : text) seq.push_back(static_cast<unsigned char>(c));
    if (ranks_.empty()) return seq;
    // Applying the lowest-ranked merge present until none remain is the same
    // as applying every merge in training order: a merge can only create
    // pairs whose rank is higher than its own.
    while (seq.size() > 1) {
        std::size_t best_rank = std::numeric_limits<std::size_t>::max();
        Pair best{};
        std::uint32_t merged = 0;
        for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
            const auto it = ranks_.find(Pair{seq[i], seq[i + 1]});
            if (it != ranks_.end() && it->second.first < best_rank) {
                best_rank = it->second.first;
                best = it->first;
                merged = it->second.second;
            }
        }
        if (best_rank == std::numeric_limits<std::size_t>::max()) break;
        merge_in_place(seq, best, merged);
    }
    return seq;
}

std::string BpeModel::decode(std::span<const std::uint32_t> tokens) const {
    std::string out;
    for (const std::uint32_t t : tokens) {
        if (t >= vocab_.size()) {
            throw Error("tokenizer: token id " + std::to_string(t) + " out of range (vocab size " +
                        std::to_string(vocab_.size()) + ")");
        }
        out += vocab_[t];
    }
    return out;
}

std::string BpeModel::to_json() const {
    ordered_json j;
    j["vocab"] = json::array();
    for (const auto& tok : vocab_) j["vocab"].push_back(base64_encode(tok));
    j["merges"] = json::array();
    for (const auto& m : merges_) j["merges"].push_back({m.left, m.right, m.merged});
    return j.dump();
}

BpeModel BpeModel::from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(std::string("tokenizer: invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("vocab") || !j.contains("merges") || !j["vocab"].is_array() ||
        !j["merges"].is_array()) {
        throw Error("tokenizer: expected {\"vocab\": [...], \"merges\": [...]}");
    }
    std::vector<std::string> vocab;
    for (const auto& tok : j["vocab"]) {
        if (!tok.is_string()) throw Error("tokenizer: vocab entries must be base64 strings");
        vocab.push_back(base64_decode(tok.get<std::string>()));
    }
    std::vector<MergeRule> merges;
    for (const auto& m : j["merges"]) {
        if (!m.is_array() || m.size() != 3 || !m[0].is_number_unsigned() || !m[1].is_number_unsigned() ||
            !m[2].is_number_unsigned()) {
            throw Error("tokenizer: merges entries must be [left, right, merged]");
        }
        merges.push_back({m[0].get<std::uint32_t>(), m[1].get<std::uint32_t>(), m[2].get<std::uint32_t>()});
    }
    return BpeModel(std::move(vocab), std::move(merges));
}

void BpeModel::save(const std::filesystem::path& path) const { write_file(path, to_json() + "\n"); }

BpeModel BpeModel::load(const std::filesystem::path& path) { return from_json(read_file(path)); }

BpeModel train_bpe(std::span<const std::string> texts, std::size_t vocab_size) {
    if (vocab_size < 256) throw Error("train_bpe: vocab_size must be >= 256");
    if (texts.empty()) throw Error("train_bpe: empty corpus");

    // Identical texts share one working sequence with a weight.
    std::vector<std::vector<std::uint32_t>> seqs;
    std::vector<std::int64_t> weights;
    {
        std::map<std::string_view, std::size_t> index;
        for (const auto& t : texts) {
            const auto [it, inserted] = index.emplace(t, seqs.size());
            if (inserted) {
                seqs.emplace_back(t.begin(), t.end());
                for (auto& v : seqs.back()) v &= 0xff;
                weights.push_back(1);
            } else {
                ++weights[it->second];
            }
        }
    }

    std::vector<std::string> vocab = byte_vocab();
    std::vector<MergeRule> merges;
    std::unordered_map<Pair, std::int64_t, PairHash> counts;
    std::unordered_map<Pair, std::set<std::size_t>, PairHash> where;

    for (std::size_t s = 0; s < seqs.size(); ++s) {
        for (std::size_t i = 0; i + 1 < seqs[s].size(); ++i) {
            const Pair p{seqs[s][i], seqs[s][i + 1]};
            counts[p] += weights[s];
            where[p].insert(s);
        }
    }

    struct Entry {
        std::int64_t count;
        Pair pair;
    };
    // Highest count first; ties go to the lexicographically smallest pair bytes.
    auto worse = [&vocab](const Entry& x, const Entry& y) {
        if (x.count != y.count) return x.count < y.count;
        return std::tie(vocab[x.pair.first], vocab[x.pair.second]) >
               std::tie(vocab[y.pair.first], vocab[y.pair.second]);
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> heap(worse);
    for (const auto& [p, c] : counts) heap.push({c, p});

    while (vocab.size() < vocab_size && !heap.empty()) {
        const Entry top = heap.top();
        heap.pop();
        const auto it = counts.find(top.pair);
        if (it == counts.end() || it->second != top.count) continue;  // stale
        if (top.count < 2) break;

        const auto merged = static_cast<std::uint32_t>(vocab.size());
        vocab.push_back(vocab[top.pair.first] + vocab[top.pair.second]);
        merges.push_back({top.pair.first, top.pair.second, merged});

        std::set<Pair> touched;
        const std::set<std::size_t> affected = where[top.pair];
        for (const std::size_t s : affected) {
            auto& seq = seqs[s];
            for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
                const Pair p{seq[i], seq[i + 1]};
                counts[p] -= weights[s];
                touched.insert(p);
            }
            merge_in_place(seq, top.pair, merged);
            for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
                const Pair p{seq[i], seq[i + 1]};
                counts[p] += weights[s];
                where[p].insert(s);
                touched.insert(p);
            }
        }
        where.erase(top.pair);
        for (const Pair& p : touched) {
            const auto c = counts[p];
            if (c <= 0) {
                counts.erase(p);
            } else {
                heap.push({c, p});
            }
        }
    }
    return BpeModel(std::move(vocab), std::move(merges));
}

}  // namespace minrepair::tokenize
