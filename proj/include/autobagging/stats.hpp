#pragma once

#include "autobagging/common.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

// Statistical kernels shared by the metafeature generator, the metadatabase and
// the evaluation harness. Inputs are spans of reals in which NaN marks a missing
// entry; discrete inputs carry category codes. A NaN result means "undefined".

namespace autobagging {

/// Shannon entropy in bits over non-missing values.
double entropy(std::span<const double> codes);

/// Mutual information in bits over jointly non-missing pairs.
double mutual_information(std::span<const double> a, std::span<const double> b);

/// Chance-corrected agreement (p_o - p_e) / (1 - p_e).
double cohen_kappa(std::span<const int> truth, std::span<const int> predicted);

/// Ranks with ties sharing the average of the positions they span. With
/// `descending`, the largest value gets rank 1.
std::vector<double> tie_averaged_ranks(std::span<const double> values, bool descending = false);

template <typename Scalar>
std::vector<Scalar> present_values(std::span<const Scalar> v)
{
    std::vector<Scalar> out;
    out.reserve(v.size());
    for (Scalar x : v)
        if (x == x)
            out.push_back(x);
    return out;
}

/// m3 / m2^{3/2} with population moments.
template <typename Scalar>
Scalar skewness(std::span<const Scalar> values)
{
    const auto x = present_values(values);
    if (x.size() < 3)
        return static_cast<Scalar>(kMissing);
    Scalar mean = 0;
    for (Scalar v : x)
        mean += v;
    mean /= static_cast<Scalar>(x.size());
    Scalar m2 = 0, m3 = 0;
    for (Scalar v : x) {
        const Scalar d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= static_cast<Scalar>(x.size());
    m3 /= static_cast<Scalar>(x.size());
    if (!(m2 > 0) || m2 <= std::numeric_limits<Scalar>::epsilon() * mean * mean)
        return static_cast<Scalar>(kMissing);
    return m3 / std::pow(m2, Scalar(1.5));
}

/// Product-moment correlation over jointly non-missing pairs.
template <typename Scalar>
Scalar pearson(std::span<const Scalar> x, std::span<const Scalar> y)
{
    Scalar sx = 0, sy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] == x[i] && y[i] == y[i]) {
            sx += x[i];
            sy += y[i];
            ++n;
        }
    if (n < 2)
        return static_cast<Scalar>(kMissing);
    const Scalar mx = sx / static_cast<Scalar>(n), my = sy / static_cast<Scalar>(n);
    Scalar sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] == x[i] && y[i] == y[i]) {
            sxy += (x[i] - mx) * (y[i] - my);
            sxx += (x[i] - mx) * (x[i] - mx);
            syy += (y[i] - my) * (y[i] - my);
        }
    if (!(sxx > 0) || !(syy > 0))
        return static_cast<Scalar>(kMissing);
    return std::clamp(sxy / std::sqrt(sxx * syy), Scalar(-1), Scalar(1));
}

/// SS_between / SS_total of `x` grouped by the discrete `groups`.
double eta_squared(std::span<const double> x, std::span<const double> groups);

enum class Post { avg, max, min, sd, var, hist };

/// Relative frequencies over `bins` equal-width bins spanning [min, max];
/// a constant multiset puts all mass in the first bin.
std::vector<double> histogram(std::span<const double> values, int bins);

/// Aggregates a multiset of values (NaN entries ignored). Spread measures use
/// population moments and need at least two values.
double postprocess(std::span<const double> values, Post p, int bin = 0, int bins = 10);

std::string to_string(Post p);

} // namespace autobagging
