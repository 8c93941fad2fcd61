#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace aptest {

/// Shortest round-trip representation; stable across runs, so reports compare byte for byte.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "NA";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

/// Fixed-precision representation for human-facing summaries.
inline std::string format_fixed(double x, int digits) {
    if (std::isnan(x)) return "NA";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::fixed, digits);
    return std::string(buf, res.ptr);
}

}  // namespace aptest
