#include "autobagging/stats.hpp"

#include <map>
#include <numeric>

namespace autobagging {

namespace {

double entropy_of_counts(const auto& counts, double n)
{
    double h = 0.0;
    for (const auto& [_, c] : counts) {
        const double p = static_cast<double>(c) / n;
        h -= p * std::log2(p);
    }
    return h;
}

} // namespace

double entropy(std::span<const double> codes)
{
    std::map<double, std::size_t> counts;
    std::size_t n = 0;
    for (double v : codes)
        if (!is_missing(v)) {
            ++counts[v];
            ++n;
        }
    if (n == 0)
        return kMissing;
    return std::max(0.0, entropy_of_counts(counts, static_cast<double>(n)));
}

double mutual_information(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw Error("mutual_information: length mismatch");
    std::map<double, std::size_t> ca, cb;
    std::map<std::pair<double, double>, std::size_t> joint;
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (is_missing(a[i]) || is_missing(b[i]))
            continue;
        ++ca[a[i]];
        ++cb[b[i]];
        ++joint[{a[i], b[i]}];
        ++n;
    }
    if (n == 0)
        return kMissing;
    const double total = static_cast<double>(n);
    const double mi = entropy_of_counts(ca, total) + entropy_of_counts(cb, total) - entropy_of_counts(joint, total);
    return std::max(0.0, mi);
}

double cohen_kappa(std::span<const int> truth, std::span<const int> predicted)
{
    if (truth.size() != predicted.size() || truth.empty())
        throw Error("cohen_kappa: inputs must have equal nonzero length");
    std::map<int, double> row, col;
    double agree = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        row[truth[i]] += 1.0;
        col[predicted[i]] += 1.0;
        agree += truth[i] == predicted[i];
    }
    const double n = static_cast<double>(truth.size());
    const double po = agree / n;
    double pe = 0.0;
    for (const auto& [label, r] : row)
        if (auto it = col.find(label); it != col.end())
            pe += (r / n) * (it->second / n);
    if (pe >= 1.0)
        return po >= 1.0 ? 1.0 : 0.0;
    return (po - pe) / (1.0 - pe);
}

std::vector<double> tie_averaged_ranks(std::span<const double> values, bool descending)
{
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
        return descending ? values[a] > values[b] : values[a] < values[b];
    });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]])
            ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t)
            ranks[order[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

double eta_squared(std::span<const double> x, std::span<const double> groups)
{
    std::map<double, std::pair<double, std::size_t>> by_group;  // sum, count
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (is_missing(x[i]) || is_missing(groups[i]))
            continue;
        auto& g = by_group[groups[i]];
        g.first += x[i];
        ++g.second;
        sum += x[i];
        ++n;
    }
    if (by_group.size() < 2)
        return kMissing;
    const double mean = sum / static_cast<double>(n);
    double sst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!is_missing(x[i]) && !is_missing(groups[i]))
            sst += (x[i] - mean) * (x[i] - mean);
    if (!(sst > 1e-12 * std::max(1.0, mean * mean) * static_cast<double>(n)))
        return kMissing;
    double ssb = 0.0;
    for (const auto& [_, g] : by_group) {
        const double gm = g.first / static_cast<double>(g.second);
        ssb += static_cast<double>(g.second) * (gm - mean) * (gm - mean);
    }
    return std::clamp(ssb / sst, 0.0, 1.0);
}

std::vector<double> histogram(std::span<const double> values, int bins)
{
    const auto x = present_values(values);
    if (x.empty() || bins < 1)
        return {};
    std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    const double min = *lo, max = *hi;
    for (double v : x) {
        std::size_t b = 0;
        if (max > min) {
            const double pos = (v - min) / (max - min) * bins;
            b = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, double(bins - 1)));
        }
        h[b] += 1.0;
    }
    for (double& v : h)
        v /= static_cast<double>(x.size());
    return h;
}

double postprocess(std::span<const double> values, Post p, int bin, int bins)
{
    const auto x = present_values(values);
    if (x.empty())
        return kMissing;
    switch (p) {
    case Post::avg:
        return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    case Post::max:
        return *std::max_element(x.begin(), x.end());
    case Post::min:
        return *std::min_element(x.begin(), x.end());
    case Post::sd:
    case Post::var: {
        if (x.size() < 2)
            return kMissing;
        const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
        double ss = 0.0;
        for (double v : x)
            ss += (v - mean) * (v - mean);
        const double var = ss / static_cast<double>(x.size());
        return p == Post::var ? var : std::sqrt(var);
    }
    case Post::hist: {
        const auto h = histogram(x, bins);
        return h.at(static_cast<std::size_t>(bin));
    }
    }
    return kMissing;
}

std::string to_string(Post p)
{
    switch (p) {
    case Post::avg: return "avg";
    case Post::max: return "max";
    case Post::min: return "min";
    case Post::sd: return "sd";
    case Post::var: return "var";
    case Post::hist: return "hist";
    }
    return "?";
}

} // namespace autobagging
