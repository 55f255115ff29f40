#include "minrepair/verdict.hpp"

namespace minrepair {

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::AC: return "AC";
        case Verdict::WA: return "WA";
        case Verdict::RE: return "RE";
        case Verdict::TLE: return "TLE";
        case Verdict::MLE: return "MLE";
        case Verdict::CE: return "CE";
    }
    return "?";
}

std::optional<Verdict> parse_verdict(std::string_view name) {
    for (const Verdict v : {Verdict::AC, Verdict::WA, Verdict::RE, Verdict::TLE, Verdict::MLE, Verdict::CE}) {
        if (to_string(v) == name) return v;
    }
    return std::nullopt;
}

}  // namespace minrepair
