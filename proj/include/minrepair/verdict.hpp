#pragma once

#include <optional>
#include <string_view>

namespace minrepair {

// Online-judge verdicts. Everything except AC is a wrong attempt.
enum class Verdict { AC, WA, RE, TLE, MLE, CE };

std::string_view to_string(Verdict v);
// Returns nullopt for anything other than the six verdict names.
std::optional<Verdict> parse_verdict(std::string_view name);

}  // namespace minrepair
