#include "autobagging/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace autobagging {

double weighted_gini(std::span<const double> counts)
{
    double n = 0.0, sq = 0.0;
    for (double c : counts) {
        n += c;
        sq += c * c;
    }
    return n > 0.0 ? n - sq / n : 0.0;
}

const TreeNode& ClassificationTree::leaf_for(const Dataset& d, std::size_t row) const
{
    const TreeNode* node = &nodes_.front();
    while (!node->is_leaf()) {
        const Column& c = d.features[static_cast<std::size_t>(node->feature)];
        bool go_left;
        if (c.is_missing(row))
            go_left = node->missing_left;
        else if (node->categorical)
            go_left = c.values[row] == node->threshold;
        else
            go_left = c.values[row] <= node->threshold;
        node = &nodes_[static_cast<std::size_t>(go_left ? node->left : node->right)];
    }
    return *node;
}

int ClassificationTree::predict(const Dataset& d, std::size_t row) const
{
    return leaf_for(d, row).label;
}

int ClassificationTree::depth() const
{
    if (nodes_.empty())
        return 0;
    std::vector<int> depth_of(nodes_.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        if (n.is_leaf()) {
            best = std::max(best, depth_of[i]);
            continue;
        }
        depth_of[static_cast<std::size_t>(n.left)] = depth_of[i] + 1;
        depth_of[static_cast<std::size_t>(n.right)] = depth_of[i] + 1;
    }
    return best;
}

std::size_t ClassificationTree::leaf_count() const
{
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

namespace {

struct Split {
    double score = std::numeric_limits<double>::infinity();
    int feature = -1;
    double threshold = 0.0;
    bool categorical = false;
    bool missing_left = true;
};

int argmax_first(std::span<const double> v)
{
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

class TreeGrower {
public:
    TreeGrower(const Dataset& d, const TreeParams& p) : d_(d), p_(p), classes_(d.n_classes()) {}

    std::vector<TreeNode> run(std::vector<std::size_t> rows)
    {
        build(rows, 0);
        return std::move(nodes_);
    }

private:
    int make_leaf(const std::vector<double>& counts)
    {
        TreeNode leaf;
        const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
        leaf.distribution.resize(classes_);
        for (std::size_t c = 0; c < classes_; ++c)
            leaf.distribution[c] = counts[c] / total;
        leaf.label = argmax_first(counts);
        nodes_.push_back(std::move(leaf));
        return static_cast<int>(nodes_.size() - 1);
    }

    bool better(double score, const Split& best) const
    {
        return best.feature < 0 || score < best.score - 1e-12 * (1.0 + std::abs(best.score));
    }

    // Child sizes include missing rows routed to the larger branch.
    void consider(Split& best, int feature, double threshold, bool categorical,
                  std::span<const double> left, std::span<const double> right,
                  std::span<const double> missing, double n_left, double n_right)
    {
        const bool missing_left = n_left >= n_right;
        const double n_missing = std::accumulate(missing.begin(), missing.end(), 0.0);
        const double size_left = n_left + (missing_left ? n_missing : 0.0);
        const double size_right = n_right + (missing_left ? 0.0 : n_missing);
        const auto min_leaf = static_cast<double>(p_.min_leaf);
        if (size_left < min_leaf || size_right < min_leaf)
            return;
        scratch_l_.assign(left.begin(), left.end());
        scratch_r_.assign(right.begin(), right.end());
        for (std::size_t c = 0; c < classes_; ++c)
            (missing_left ? scratch_l_ : scratch_r_)[c] += missing[c];
        const double score = weighted_gini(scratch_l_) + weighted_gini(scratch_r_);
        if (better(score, best))
            best = {score, feature, threshold, categorical, missing_left};
    }

    Split find_split(const std::vector<std::size_t>& rows)
    {
        Split best;
        std::vector<double> missing(classes_), total(classes_), left(classes_), right(classes_);
        std::vector<std::pair<double, int>> vals;
        for (std::size_t j = 0; j < d_.n_features(); ++j) {
            const Column& col = d_.features[j];
            std::fill(missing.begin(), missing.end(), 0.0);
            std::fill(total.begin(), total.end(), 0.0);
            if (col.is_numeric()) {
                vals.clear();
                for (auto r : rows) {
                    const auto y = static_cast<std::size_t>(d_.target[r]);
                    if (col.is_missing(r))
                        missing[y] += 1.0;
                    else {
                        vals.emplace_back(col.values[r], d_.target[r]);
                        total[y] += 1.0;
                    }
                }
                if (vals.size() < 2)
                    continue;
                std::sort(vals.begin(), vals.end());
                std::fill(left.begin(), left.end(), 0.0);
                const double m = static_cast<double>(vals.size());
                for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                    left[static_cast<std::size_t>(vals[i].second)] += 1.0;
                    const double a = vals[i].first, b = vals[i + 1].first;
                    if (a == b)
                        continue;
                    double threshold = a + (b - a) / 2.0;
                    if (threshold >= b)
                        threshold = a;
                    for (std::size_t c = 0; c < classes_; ++c)
                        right[c] = total[c] - left[c];
                    const double n_left = static_cast<double>(i + 1);
                    consider(best, static_cast<int>(j), threshold, false, left, right, missing,
                             n_left, m - n_left);
                }
            } else {
                const std::size_t k = col.category_count();
                std::vector<double> table(k * classes_, 0.0);
                std::vector<double> cat_n(k, 0.0);
                double m = 0.0;
                for (auto r : rows) {
                    const auto y = static_cast<std::size_t>(d_.target[r]);
                    if (col.is_missing(r)) {
                        missing[y] += 1.0;
                        continue;
                    }
                    const auto code = static_cast<std::size_t>(col.values[r]);
                    table[code * classes_ + y] += 1.0;
                    cat_n[code] += 1.0;
                    total[y] += 1.0;
                    m += 1.0;
                }
                for (std::size_t code = 0; code < k; ++code) {
                    if (cat_n[code] == 0.0 || cat_n[code] == m)
                        continue;
                    for (std::size_t c = 0; c < classes_; ++c) {
                        left[c] = table[code * classes_ + c];
                        right[c] = total[c] - left[c];
                    }
                    consider(best, static_cast<int>(j), static_cast<double>(code), true, left, right,
                             missing, cat_n[code], m - cat_n[code]);
                }
            }
        }
        return best;
    }

    int build(std::vector<std::size_t>& rows, int depth)
    {
        std::vector<double> counts(classes_, 0.0);
        for (auto r : rows)
            counts[static_cast<std::size_t>(d_.target[r])] += 1.0;
        const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) <= 1;
        if (pure || depth >= p_.max_depth || rows.size() < 2 * p_.min_leaf)
            return make_leaf(counts);

        const Split s = find_split(rows);
        if (s.feature < 0)
            return make_leaf(counts);

        const Column& col = d_.features[static_cast<std::size_t>(s.feature)];
        std::vector<std::size_t> left_rows, right_rows;
        for (auto r : rows) {
            bool go_left;
            if (col.is_missing(r))
                go_left = s.missing_left;
            else if (s.categorical)
                go_left = col.values[r] == s.threshold;
            else
                go_left = col.values[r] <= s.threshold;
            (go_left ? left_rows : right_rows).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();

        const auto self = nodes_.size();
        TreeNode node;
        node.feature = s.feature;
        node.threshold = s.threshold;
        node.categorical = s.categorical;
        node.missing_left = s.missing_left;
        node.label = argmax_first(counts);
        nodes_.push_back(std::move(node));
        const int l = build(left_rows, depth + 1);
        const int r = build(right_rows, depth + 1);
        nodes_[self].left = l;
        nodes_[self].right = r;
        return static_cast<int>(self);
    }

    const Dataset& d_;
    TreeParams p_;
    std::size_t classes_;
    std::vector<TreeNode> nodes_;
    std::vector<double> scratch_l_, scratch_r_;
};

} // namespace

ClassificationTree grow_tree(const Dataset& d, std::span<const std::size_t> rows, const TreeParams& params)
{
    if (rows.empty())
        throw Error("grow_tree: no rows");
    TreeParams p = params;
    p.min_leaf = std::max<std::size_t>(p.min_leaf, 1);
    TreeGrower grower(d, p);
    return {grower.run({rows.begin(), rows.end()}), d.n_classes()};
}

Predictor fit_tree(const Dataset& d, std::span<const std::size_t> rows, const TreeParams& params)
{
    return Predictor(grow_tree(d, rows, params));
}

Predictor fit_stump(const Dataset& d, std::span<const std::size_t> rows, int depth)
{
    if (depth < 1 || depth > 3)
        throw Error("fit_stump: depth must be 1, 2 or 3");
    return fit_tree(d, rows, {depth, 1});
}

NaiveBayes::NaiveBayes(const Dataset& d, std::span<const std::size_t> rows)
{
    if (rows.empty())
        throw Error("naive bayes: no rows");
    const std::size_t C = d.n_classes();
    const auto counts = d.class_counts(rows);
    log_prior_.resize(C);
    for (std::size_t c = 0; c < C; ++c)
        log_prior_[c] = counts[c] > 0 ? std::log(double(counts[c]) / double(rows.size()))
                                      : -std::numeric_limits<double>::infinity();

    mean_.resize(d.n_features());
    var_.resize(d.n_features());
    log_p_.resize(d.n_features());
    for (std::size_t j = 0; j < d.n_features(); ++j) {
        const Column& col = d.features[j];
        if (col.is_numeric()) {
            std::vector<double> sum(C, 0.0), n(C, 0.0);
            double pooled_sum = 0.0, pooled_n = 0.0;
            for (auto r : rows)
                if (!col.is_missing(r)) {
                    const auto y = static_cast<std::size_t>(d.target[r]);
                    sum[y] += col.values[r];
                    n[y] += 1.0;
                    pooled_sum += col.values[r];
                    pooled_n += 1.0;
                }
            std::vector<double> ss(C, 0.0);
            mean_[j].assign(C, 0.0);
            for (std::size_t c = 0; c < C; ++c)
                mean_[j][c] = n[c] > 0 ? sum[c] / n[c] : (pooled_n > 0 ? pooled_sum / pooled_n : 0.0);
            double pooled_ss = 0.0;
            const double pooled_mean = pooled_n > 0 ? pooled_sum / pooled_n : 0.0;
            for (auto r : rows)
                if (!col.is_missing(r)) {
                    const auto y = static_cast<std::size_t>(d.target[r]);
                    ss[y] += (col.values[r] - mean_[j][y]) * (col.values[r] - mean_[j][y]);
                    pooled_ss += (col.values[r] - pooled_mean) * (col.values[r] - pooled_mean);
                }
            var_[j].assign(C, kVarianceFloor);
            for (std::size_t c = 0; c < C; ++c) {
                const double v = n[c] > 0 ? ss[c] / n[c] : (pooled_n > 0 ? pooled_ss / pooled_n : 0.0);
                var_[j][c] = std::max(v, kVarianceFloor);
            }
        } else {
            const std::size_t K = col.category_count();
            std::vector<std::vector<double>> table(C, std::vector<double>(K, 0.0));
            std::vector<double> n(C, 0.0);
            for (auto r : rows)
                if (!col.is_missing(r)) {
                    const auto y = static_cast<std::size_t>(d.target[r]);
                    table[y][static_cast<std::size_t>(col.values[r])] += 1.0;
                    n[y] += 1.0;
                }
            log_p_[j].assign(C, std::vector<double>(K, 0.0));
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t k = 0; k < K; ++k)
                    log_p_[j][c][k] = std::log((table[c][k] + 1.0) / (n[c] + double(K)));
        }
    }
}

int NaiveBayes::predict(const Dataset& d, std::size_t row) const
{
    const std::size_t C = log_prior_.size();
    std::vector<double> score(log_prior_);
    for (std::size_t j = 0; j < d.n_features(); ++j) {
        const Column& col = d.features[j];
        if (col.is_missing(row))
            continue;
        const double x = col.values[row];
        for (std::size_t c = 0; c < C; ++c) {
            if (std::isinf(score[c]))
                continue;
            if (col.is_numeric()) {
                const double v = var_[j][c];
                const double z = x - mean_[j][c];
                score[c] += -0.5 * std::log(2.0 * M_PI * v) - z * z / (2.0 * v);
            } else {
                const auto code = static_cast<std::size_t>(x);
                if (code < log_p_[j][c].size())
                    score[c] += log_p_[j][c][code];
            }
        }
    }
    return argmax_first(score);
}

MajorityClass::MajorityClass(const Dataset& d, std::span<const std::size_t> rows)
{
    if (rows.empty())
        throw Error("majority: no rows");
    const auto counts = d.class_counts(rows);
    label_ = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

Predictor fit_naive_bayes(const Dataset& d, std::span<const std::size_t> rows)
{
    return Predictor(NaiveBayes(d, rows));
}

Predictor fit_majority(const Dataset& d, std::span<const std::size_t> rows)
{
    return Predictor(MajorityClass(d, rows));
}

int Predictor::predict(const Dataset& d, std::size_t row) const
{
    return std::visit([&](const auto& m) { return m.predict(d, row); }, model_);
}

std::vector<int> Predictor::predict(const Dataset& d, std::span<const std::size_t> rows) const
{
    std::vector<int> out;
    out.reserve(rows.size());
    for (auto r : rows)
        out.push_back(predict(d, r));
    return out;
}

std::vector<int> Predictor::predict_all(const Dataset& d) const
{
    const auto rows = d.all_rows();
    return predict(d, rows);
}

double accuracy(const Dataset& d, std::span<const std::size_t> rows, std::span<const int> predicted)
{
    if (rows.empty())
        return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < rows.size(); ++i)
        hit += d.target[rows[i]] == predicted[i];
    return static_cast<double>(hit) / static_cast<double>(rows.size());
}

} // namespace autobagging
