#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace shuntflow::detail {

/// Round-trip safe float formatting shared by every text export: shortest
/// decimal string whose parse recovers the double bit-for-bit. Infinities
/// come out as the words "inf" / "-inf".
inline std::string fmt_double(double v) {
    if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace shuntflow::detail
