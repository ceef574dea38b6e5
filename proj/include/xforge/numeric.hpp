#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace xforge {

/// count/total as a percentage rounded half-up to one decimal. Integer
/// arithmetic, so 49/80 = 61.25 reports 61.3 rather than a binary neighbour.
inline double percent_1dp(std::size_t count, std::size_t total) {
    if (total == 0) throw std::invalid_argument("percent_1dp: zero total");
    const auto tenths = (count * 2000 + total) / (2 * total);
    return static_cast<double>(tenths) / 10.0;
}

/// Rounds half away from zero to one decimal.
inline double round_1dp(double x) { return std::round(x * 10.0) / 10.0; }

}  // namespace xforge
