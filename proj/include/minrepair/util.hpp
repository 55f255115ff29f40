#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace minrepair {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::string_view bytes);
// Throws Error on malformed input.
std::string base64_decode(std::string_view text);

bool is_valid_utf8(std::string_view bytes);

// Decodes UTF-8 into Unicode scalar values. Invalid bytes decode to one
// U+FFFD each, so every input byte sequence has a defined length.
std::u32string decode_utf8(std::string_view bytes);
std::string encode_utf8(std::u32string_view text);

// Seeded 64-bit generator whose bounded draws are identical across standard
// libraries (std::uniform_int_distribution is implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, bound); bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// Mixes a string into a seed (first 8 bytes of its SHA-256).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view salt);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Calls fn(line_number, parsed_object) for every non-blank line. Parse
// failures raise IngestError with the line number.
void for_each_jsonl(std::istream& in, const std::function<void(std::size_t, const json&)>& fn);

// Field accessors that raise IngestError naming the field.
std::string require_string(const json& obj, const char* field, std::size_t line);
std::int64_t require_int(const json& obj, const char* field, std::size_t line);

}  // namespace minrepair
