#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>

namespace taxrank {

// Monetary results are rounded half away from zero to whole cents at
// operation boundaries; intermediate math stays in double precision.
inline double round_cents(double usd) {
    return std::copysign(std::floor(std::fabs(usd) * 100.0 + 0.5), usd) / 100.0;
}

// Whole-cent integer used wherever two outputs are compared for equality.
inline std::int64_t to_cents(double usd) {
    return std::llround(usd * 100.0);
}

inline std::string format_usd(double usd) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", usd);
    return buf;
}

} // namespace taxrank
