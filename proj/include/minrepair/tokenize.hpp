#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace minrepair::tokenize {

using TokenSeq = std::vector<std::uint32_t>;

struct MergeRule {
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t merged = 0;

    friend bool operator==(const MergeRule&, const MergeRule&) = default;
};

// Anything that can count tokens for the corpus length filter.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual TokenSeq encode(std::string_view text) const = 0;
    virtual std::size_t count(std::string_view text) const { return encode(text).size(); }
};

// Byte-level BPE model. Ids 0..255 are the raw bytes; each merge appends one
// id. Immutable after construction.
class BpeModel final : public Tokenizer {
public:
    // The 256-entry byte-level model with no merges.
    BpeModel();
    // Validates that vocab starts with the byte alphabet and that every merge
    // output is the concatenation of its inputs.
    BpeModel(std::vector<std::string> vocab, std::vector<MergeRule> merges);

    TokenSeq encode(std::string_view text) const override;
    // Throws Error on an out-of-range id.
    std::string decode(std::span<const std::uint32_t> tokens) const;

    const std::vector<std::string>& vocab() const noexcept { return vocab_; }
    const std::vector<MergeRule>& merges() const noexcept { return merges_; }
    std::size_t vocab_size() const noexcept { return vocab_.size(); }

    // JSON {"vocab": [base64...], "merges": [[left, right, merged]...]}.
    std::string to_json() const;
    static BpeModel from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static BpeModel load(const std::filesystem::path& path);

private:
    std::vector<std::string> vocab_;
    std::vector<MergeRule> merges_;
    // (left, right) -> (rank, merged)
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::pair<std::size_t, std::uint32_t>> ranks_;
};

// Greedy BPE: repeatedly merges the most frequent adjacent pair (ties go to
// the lexicographically smallest (left bytes, right bytes)) until vocab_size
// is reached or no pair occurs twice. vocab_size must be >= 256 and texts
// nonempty.
BpeModel train_bpe(std::span<const std::string> texts, std::size_t vocab_size);

}  // namespace minrepair::tokenize
