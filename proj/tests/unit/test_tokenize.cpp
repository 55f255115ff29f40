#include "minrepair/tokenize.hpp"

#include <map>
#include <random>

#include "gtest/gtest.h"
#include "minrepair/error.hpp"

namespace minrepair::tokenize {
namespace {

using Seq = std::vector<std::uint32_t>;

Seq bytes_of(const std::string& s) {
    Seq out;
    for (const char c : s) out.push_back(static_cast<unsigned char>(c));
    return out;
}

void apply_merge(Seq& seq, const MergeRule& m) {
    Seq out;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i + 1 < seq.size() && seq[i] == m.left && seq[i + 1] == m.right) {
            out.push_back(m.merged);
            ++i;
        } else {
            out.push_back(seq[i]);
        }
    }
    seq = std::move(out);
}

// Applies each merge over the whole sequence in training order.
Seq encode_reference(const std::string& text, const std::vector<MergeRule>& merges) {
    Seq seq = bytes_of(text);
    for (const auto& m : merges) apply_merge(seq, m);
    return seq;
}

// Recounts every adjacent pair from scratch at each step.
std::vector<MergeRule> train_reference(const std::vector<std::string>& texts, std::size_t vocab_size) {
    std::vector<std::string> vocab;
    for (int b = 0; b < 256; ++b) vocab.emplace_back(1, static_cast<char>(b));
    std::vector<Seq> seqs;
    for (const auto& t : texts) seqs.push_back(bytes_of(t));
    std::vector<MergeRule> merges;
    while (vocab.size() < vocab_size) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, long> counts;
        for (const auto& s : seqs) {
            for (std::size_t i = 0; i + 1 < s.size(); ++i) ++counts[{s[i], s[i + 1]}];
        }
        const std::pair<std::uint32_t, std::uint32_t>* best = nullptr;
        long best_count = 0;
        for (const auto& [p, c] : counts) {
            if (c > best_count ||
                (c == best_count && std::tie(vocab[p.first], vocab[p.second]) < std::tie(vocab[best->first], vocab[best->second]))) {
                best = &p;
                best_count = c;
            }
        }
        if (best == nullptr || best_count < 2) break;
        const MergeRule m{best->first, best->second, static_cast<std::uint32_t>(vocab.size())};
        vocab.push_back(vocab[m.left] + vocab[m.right]);
        merges.push_back(m);
        for (auto& s : seqs) apply_merge(s, m);
    }
    return merges;
}

std::string random_program(std::mt19937_64& rng, std::size_t max_len) {
    static const std::string alphabet = "abc xy\n()=+1";
    std::string s(rng() % (max_len + 1), 'a');
    for (auto& ch : s) ch = alphabet[rng() % alphabet.size()];
    return s;
}

TEST(BpeModel, ByteLevelDefault) {
    const BpeModel m;
    EXPECT_EQ(m.vocab_size(), 256u);
    EXPECT_EQ(m.encode("ab"), (Seq{97, 98}));
    EXPECT_EQ(m.count(""), 0u);
    const std::string raw("\xff\0z", 3);
    EXPECT_EQ(m.decode(m.encode(raw)), raw);
}

TEST(TrainBpe, SmallCorpusByHand) {
    const std::vector<std::string> texts{"aab", "aab", "xaab"};
    const auto m = train_bpe(texts, 300);
    // (a,a) and (a,b) both occur 3 times; (a,a) has the smaller bytes.
    ASSERT_EQ(m.merges().size(), 2u);
    EXPECT_EQ(m.merges()[0], (MergeRule{'a', 'a', 256}));
    // Then (aa,b) occurs 3 times and (x,aab) once.
    EXPECT_EQ(m.merges()[1], (MergeRule{256, 'b', 257}));
    EXPECT_EQ(m.vocab()[257], "aab");
    EXPECT_EQ(m.encode("aab"), (Seq{257}));
}

TEST(TrainBpe, TiesGoToSmallestBytes) {
    const std::vector<std::string> texts{"xyxy", "abab"};
    const auto m = train_bpe(texts, 257);
    ASSERT_EQ(m.merges().size(), 1u);
    EXPECT_EQ(m.merges()[0], (MergeRule{'a', 'b', 256}));
}

TEST(TrainBpe, RespectsVocabSize) {
    std::mt19937_64 rng(5);
    std::vector<std::string> texts;
    for (int i = 0; i < 30; ++i) texts.push_back(random_program(rng, 80));
    EXPECT_EQ(train_bpe(texts, 256).vocab_size(), 256u);
    EXPECT_EQ(train_bpe(texts, 270).vocab_size(), 270u);
    EXPECT_THROW(train_bpe(texts, 255), Error);
    EXPECT_THROW(train_bpe(std::vector<std::string>{}, 300), Error);
}

TEST(TrainBpe, MatchesNaiveTrainer) {
    std::mt19937_64 rng(11);
    for (int round = 0; round < 20; ++round) {
        std::vector<std::string> texts;
        const int n = 1 + static_cast<int>(rng() % 8);
        for (int i = 0; i < n; ++i) texts.push_back(random_program(rng, 60));
        if (round % 4 == 0) texts.push_back(std::string(texts.front()));  // duplicate text
        const std::size_t vocab = 256 + rng() % 60;
        const auto model = train_bpe(texts, vocab);
        ASSERT_EQ(model.merges(), train_reference(texts, vocab)) << "round " << round;
    }
}

TEST(BpeModel, EncodeMatchesMergesInTrainingOrder) {
    std::mt19937_64 rng(13);
    std::vector<std::string> texts;
    for (int i = 0; i < 40; ++i) texts.push_back(random_program(rng, 100));
    const auto model = train_bpe(texts, 400);
    for (int i = 0; i < 500; ++i) {
        const auto s = random_program(rng, 120);
        ASSERT_EQ(model.encode(s), encode_reference(s, model.merges()));
    }
}

TEST(BpeModel, RoundTripsArbitraryBytes) {
    std::mt19937_64 rng(17);
    std::vector<std::string> texts;
    for (int i = 0; i < 40; ++i) texts.push_back(random_program(rng, 100));
    const auto model = train_bpe(texts, 500);
    for (int i = 0; i < 10000; ++i) {
        std::string s;
        if (i % 2 == 0) {
            s = random_program(rng, 64);
        } else {
            s.resize(rng() % 64);
            for (auto& ch : s) ch = static_cast<char>(rng() & 0xff);
        }
        const auto ids = model.encode(s);
        ASSERT_EQ(model.decode(ids), s);
        ASSERT_LE(ids.size(), s.size());
    }
}

TEST(BpeModel, JsonRoundTrip) {
    const std::vector<std::string> texts{"print(x)\nprint(y)\n", "print(x + y)\n"};
    const auto model = train_bpe(texts, 280);
    const auto back = BpeModel::from_json(model.to_json());
    EXPECT_EQ(back.vocab(), model.vocab());
    EXPECT_EQ(back.merges(), model.merges());
    EXPECT_EQ(back.to_json(), model.to_json());
}

TEST(BpeModel, RejectsInconsistentModels) {
    std::vector<std::string> vocab;
    for (int b = 0; b < 256; ++b) vocab.emplace_back(1, static_cast<char>(b));
    auto bad = vocab;
    bad.push_back("xy");
    EXPECT_THROW(BpeModel(bad, {{'a', 'b', 256}}), Error);
    auto good = vocab;
    good.push_back("ab");
    EXPECT_NO_THROW(BpeModel(good, {{'a', 'b', 256}}));
    EXPECT_THROW(BpeModel(good, {{'a', 'b', 257}}), Error);
    EXPECT_THROW(BpeModel(vocab, {{'a', 'b', 256}}), Error);
    EXPECT_THROW(BpeModel::from_json("{\"vocab\": 3}"), Error);
    EXPECT_THROW(BpeModel::from_json("not json"), Error);
    const BpeModel m;
    EXPECT_THROW(m.decode(Seq{256}), Error);
}

}  // namespace
}  // namespace minrepair::tokenize
