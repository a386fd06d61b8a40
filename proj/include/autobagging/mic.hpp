#pragma once

#include <span>

namespace autobagging {

struct MicParams {
    double alpha = 0.6;  // grid budget a*b <= n^alpha
    double clumps = 15;  // clump factor c
};

/// Maximal information coefficient via the approximate characteristic matrix
/// (equipartition one axis, optimize the other by dynamic programming, both
/// orientations). Uses jointly non-missing pairs; NaN when fewer than 4 pairs
/// or either side is constant.
double mic(std::span<const double> x, std::span<const double> y, const MicParams& p = {});

} // namespace autobagging
