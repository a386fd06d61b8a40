#include "autobagging/mic.hpp"

#include "autobagging/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace autobagging {

namespace {

double xlogx(double v) { return v > 0 ? v * std::log2(v) : 0.0; }

// Splits consecutive atomic groups (given by size) into about `parts` bins of
// equal mass. Returns the bin of each group.
std::vector<int> equipartition(const std::vector<std::size_t>& group_sizes, int parts)
{
    std::size_t total = 0;
    for (auto s : group_sizes)
        total += s;
    std::vector<int> bin(group_sizes.size());
    int current = 0;
    double desired = double(total) / parts, size = 0;
    std::size_t seen = 0;
    for (std::size_t g = 0; g < group_sizes.size(); ++g) {
        const double s = double(group_sizes[g]);
        if (size > 0 && current + 1 < parts && std::abs(size + s - desired) >= std::abs(size - desired)) {
            ++current;
            size = 0;
            desired = double(total - seen) / (parts - current);
        }
        bin[g] = current;
        size += s;
        seen += group_sizes[g];
    }
    return bin;
}

// Sorted order of v with runs of equal values reported as group sizes.
std::vector<std::size_t> sorted_groups(const std::vector<double>& v, std::vector<std::size_t>& order)
{
    order.resize(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<std::size_t> sizes;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && v[order[j]] == v[order[i]])
            ++j;
        sizes.push_back(j - i);
        i = j;
    }
    return sizes;
}

// Best mutual information between a partition of `x` into at most l columns
// and the fixed row assignment `q`, for every l in [2, max_cols].
std::vector<double> optimize_axis(const std::vector<double>& x, const std::vector<int>& q, int rows, int max_cols,
                                  double clump_factor)
{
    const std::size_t n = x.size();
    std::vector<std::size_t> order;
    const auto xsizes = sorted_groups(x, order);

    // Clumps: runs of equal-x groups that all sit in one row merge together;
    // a group spanning several rows stays on its own.
    std::vector<std::vector<double>> clump_counts;
    std::vector<int> clump_row;  // -1 when mixed
    std::size_t pos = 0;
    for (auto gs : xsizes) {
        std::vector<double> counts(std::size_t(rows), 0.0);
        int row = q[order[pos]];
        for (std::size_t t = 0; t < gs; ++t) {
            const int r = q[order[pos + t]];
            counts[std::size_t(r)] += 1;
            if (r != row)
                row = -1;
        }
        pos += gs;
        if (row >= 0 && !clump_row.empty() && clump_row.back() == row) {
            for (int r = 0; r < rows; ++r)
                clump_counts.back()[std::size_t(r)] += counts[std::size_t(r)];
        } else {
            clump_counts.push_back(std::move(counts));
            clump_row.push_back(row);
        }
    }

    // Superclumps keep the dynamic program tractable.
    const int limit = std::max(1, int(clump_factor * max_cols));
    if (int(clump_counts.size()) > limit) {
        std::vector<std::size_t> sizes;
        for (const auto& c : clump_counts)
            sizes.push_back(std::size_t(std::accumulate(c.begin(), c.end(), 0.0)));
        const auto bin = equipartition(sizes, limit);
        std::vector<std::vector<double>> merged(std::size_t(bin.back() + 1), std::vector<double>(std::size_t(rows), 0.0));
        for (std::size_t c = 0; c < clump_counts.size(); ++c)
            for (int r = 0; r < rows; ++r)
                merged[std::size_t(bin[c])][std::size_t(r)] += clump_counts[c][std::size_t(r)];
        clump_counts = std::move(merged);
    }

    const std::size_t k = clump_counts.size();
    std::vector<std::vector<double>> cum(k + 1, std::vector<double>(std::size_t(rows), 0.0));
    for (std::size_t c = 0; c < k; ++c)
        for (int r = 0; r < rows; ++r)
            cum[c + 1][std::size_t(r)] = cum[c][std::size_t(r)] + clump_counts[c][std::size_t(r)];

    const double total = double(n);
    double hq = 0;
    for (int r = 0; r < rows; ++r)
        hq -= xlogx(cum[k][std::size_t(r)] / total);

    // cost(s, t) = p(column) * H(Q | column) for the column holding clumps s..t-1.
    std::vector<double> cost((k + 1) * (k + 1), 0.0);
    for (std::size_t s = 0; s < k; ++s)
        for (std::size_t t = s + 1; t <= k; ++t) {
            double m = 0, acc = 0;
            for (int r = 0; r < rows; ++r) {
                const double c = cum[t][std::size_t(r)] - cum[s][std::size_t(r)];
                m += c;
                acc += xlogx(c);
            }
            // m/n * (log m - sum c/m log c/m) = (m log m - sum c log c) / n
            cost[s * (k + 1) + t] = (xlogx(m) - acc) / total;
        }

    const double neg = -std::numeric_limits<double>::infinity();
    std::vector<double> prev(k + 1, neg), cur(k + 1, neg);
    for (std::size_t t = 1; t <= k; ++t)
        prev[t] = -cost[t];
    std::vector<double> best(std::size_t(max_cols + 1), 0.0);
    best[1] = hq + prev[k];
    for (int l = 2; l <= max_cols; ++l) {
        for (std::size_t t = 1; t <= k; ++t) {
            double f = prev[t];  // fewer columns are allowed
            for (std::size_t s = 1; s < t; ++s)
                if (prev[s] > neg)
                    f = std::max(f, prev[s] - cost[s * (k + 1) + t]);
            cur[t] = f;
        }
        std::swap(prev, cur);
        best[std::size_t(l)] = hq + prev[k];
    }
    return best;
}

// Characteristic-matrix maximum with y equipartitioned and x optimized.
double one_orientation(const std::vector<double>& x, const std::vector<double>& y, double budget, double clump_factor)
{
    std::vector<std::size_t> order;
    const auto ysizes = sorted_groups(y, order);
    double result = 0;
    for (int b = 2; b * 2 <= int(budget); ++b) {
        const auto group_bin = equipartition(ysizes, b);
        std::vector<int> q(y.size());
        std::size_t pos = 0;
        for (std::size_t g = 0; g < ysizes.size(); ++g)
            for (std::size_t t = 0; t < ysizes[g]; ++t)
                q[order[pos++]] = group_bin[g];
        const int max_cols = int(budget) / b;
        const auto info = optimize_axis(x, q, b, max_cols, clump_factor);
        for (int a = 2; a <= max_cols; ++a)
            result = std::max(result, info[std::size_t(a)] / std::log2(double(std::min(a, b))));
    }
    return result;
}

} // namespace

double mic(std::span<const double> x, std::span<const double> y, const MicParams& p)
{
    if (x.size() != y.size())
        throw Error("mic: length mismatch");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!is_missing(x[i]) && !is_missing(y[i])) {
            xs.push_back(x[i]);
            ys.push_back(y[i]);
        }
    if (xs.size() < 4)
        return kMissing;
    const auto [xl, xh] = std::minmax_element(xs.begin(), xs.end());
    const auto [yl, yh] = std::minmax_element(ys.begin(), ys.end());
    if (*xl == *xh || *yl == *yh)
        return kMissing;
    const double budget = std::max(4.0, std::floor(std::pow(double(xs.size()), p.alpha)));
    const double v = std::max(one_orientation(xs, ys, budget, p.clumps), one_orientation(ys, xs, budget, p.clumps));
    return std::clamp(v, 0.0, 1.0);
}

} // namespace autobagging
