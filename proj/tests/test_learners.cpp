#include "doctest.h"

#include "autobagging/learners.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

using namespace autobagging;

namespace {

Dataset xor_data()
{
    return Dataset::from_labels("xor", {Column::numeric("a", {0, 0, 1, 1}), Column::numeric("b", {0, 1, 0, 1})},
                                {"A", "B", "B", "A"});
}

double train_accuracy(const Predictor& p, const Dataset& d)
{
    const auto rows = d.all_rows();
    const auto pred = p.predict(d, rows);
    return accuracy(d, rows, pred);
}

// Independent Gini of a row set: n * (1 - sum p^2).
double gini_of(const Dataset& d, const std::vector<std::size_t>& rows)
{
    std::map<int, double> counts;
    for (auto r : rows)
        counts[d.target[r]] += 1.0;
    double n = double(rows.size()), s = 0.0;
    for (auto& [_, c] : counts)
        s += (c / n) * (c / n);
    return rows.empty() ? 0.0 : n * (1.0 - s);
}

struct BruteSplit {
    double score;
    std::size_t left_size;
};

// Every candidate split of `rows`, with missing rows joining the larger side.
std::vector<BruteSplit> all_splits(const Dataset& d, const std::vector<std::size_t>& rows, std::size_t min_leaf)
{
    std::vector<BruteSplit> out;
    for (std::size_t j = 0; j < d.n_features(); ++j) {
        const Column& c = d.features[j];
        std::set<double> distinct;
        for (auto r : rows)
            if (!c.is_missing(r))
                distinct.insert(c.values[r]);
        std::vector<double> cuts;
        if (c.is_numeric()) {
            std::vector<double> v(distinct.begin(), distinct.end());
            for (std::size_t i = 0; i + 1 < v.size(); ++i)
                cuts.push_back((v[i] + v[i + 1]) / 2);
        } else if (distinct.size() > 1) {
            cuts.assign(distinct.begin(), distinct.end());
        }
        for (double t : cuts) {
            std::vector<std::size_t> l, r, m;
            for (auto row : rows) {
                if (c.is_missing(row))
                    m.push_back(row);
                else if (c.is_numeric() ? c.values[row] <= t : c.values[row] == t)
                    l.push_back(row);
                else
                    r.push_back(row);
            }
            auto& dst = l.size() >= r.size() ? l : r;
            dst.insert(dst.end(), m.begin(), m.end());
            if (l.size() < min_leaf || r.size() < min_leaf)
                continue;
            out.push_back({gini_of(d, l) + gini_of(d, r), l.size()});
        }
    }
    return out;
}

Dataset random_mixed(std::uint64_t seed, std::size_t n)
{
    Rng rng(seed);
    std::vector<double> a(n), b(n);
    std::vector<std::string> c(n), y(n);
    const char* cats[] = {"u", "v", "w"};
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = double(rng.below(6));
        b[i] = rng.uniform() < 0.15 ? kMissing : std::round(rng.normal() * 4) / 4;
        c[i] = rng.uniform() < 0.1 ? "?" : cats[rng.below(3)];
        y[i] = std::string(1, char('p' + rng.below(3)));
    }
    return Dataset::from_labels("mixed" + std::to_string(seed),
                                {Column::numeric("a", a), Column::numeric("b", b), Column::categorical("c", c)}, y);
}

// Replays training routing to recover the rows reaching each node.
void collect_node_rows(const ClassificationTree& t, const Dataset& d, std::vector<std::vector<std::size_t>>& out)
{
    out.assign(t.nodes().size(), {});
    for (std::size_t r = 0; r < d.n(); ++r) {
        std::size_t node = 0;
        while (true) {
            out[node].push_back(r);
            const auto& n = t.nodes()[node];
            if (n.is_leaf())
                break;
            const Column& c = d.features[std::size_t(n.feature)];
            bool left = c.is_missing(r) ? n.missing_left
                        : n.categorical ? c.values[r] == n.threshold
                                        : c.values[r] <= n.threshold;
            node = std::size_t(left ? n.left : n.right);
        }
    }
}

} // namespace

TEST_CASE("single-class rows give a single leaf")
{
    const Dataset d = Dataset::from_labels("one", {Column::numeric("x", {1, 2, 3, 4})}, {"A", "A", "B", "A"});
    const std::vector<std::size_t> rows{0, 1, 3};
    const auto p = fit_tree(d, rows, {});
    REQUIRE(p.tree());
    CHECK(p.tree()->nodes().size() == 1);
    CHECK(p.predict(d, 2) == 0);
}

TEST_CASE("1D threshold is Gini-optimal and separates the classes")
{
    const Dataset d = Dataset::from_labels("line", {Column::numeric("x", {1, 2, 3, 4})}, {"A", "A", "B", "B"});
    const auto rows = d.all_rows();
    const auto p = fit_stump(d, rows, 1);
    const auto& root = p.tree()->nodes()[0];
    CHECK(root.threshold > 2.0);
    CHECK(root.threshold < 3.0);
    CHECK(train_accuracy(p, d) == 1.0);

    // Enumerated thresholds 1.5, 2.5, 3.5: only 2.5 reaches zero impurity.
    const auto splits = all_splits(d, rows, 1);
    REQUIRE(splits.size() == 3);
    CHECK(splits[1].score == 0.0);
    CHECK(splits[0].score > 0.0);
    CHECK(splits[2].score > 0.0);
}

TEST_CASE("XOR: depth 2 fits exactly, depth 1 cannot")
{
    const Dataset d = xor_data();
    const auto rows = d.all_rows();
    CHECK(train_accuracy(fit_tree(d, rows, {2, 1}), d) == 1.0);

    const double stump = train_accuracy(fit_stump(d, rows, 1), d);
    // Enumerate every depth-1 tree: any axis cut leaves one A and one B per side.
    double best_possible = 0.0;
    for (std::size_t j = 0; j < 2; ++j)
        for (int left_label = 0; left_label < 2; ++left_label)
            for (int right_label = 0; right_label < 2; ++right_label) {
                int hit = 0;
                for (std::size_t r = 0; r < 4; ++r) {
                    const int pred = d.features[j].values[r] <= 0.5 ? left_label : right_label;
                    hit += pred == d.target[r];
                }
                best_possible = std::max(best_possible, hit / 4.0);
            }
    CHECK(best_possible <= 0.75);
    CHECK(stump <= best_possible);
}

TEST_CASE("deeper stumps never lose training accuracy on the fixed suite")
{
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const Dataset d = random_mixed(seed, 60);
        const auto rows = d.all_rows();
        const double a1 = train_accuracy(fit_stump(d, rows, 1), d);
        const double a3 = train_accuracy(fit_stump(d, rows, 3), d);
        CHECK(a3 >= a1);
    }
}

TEST_CASE("each node's split is Gini-optimal (brute force, small node sets)")
{
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        const Dataset d = random_mixed(seed, 40);
        const std::size_t min_leaf = seed % 3 + 1;
        const auto tree = grow_tree(d, d.all_rows(), {4, min_leaf});
        std::vector<std::vector<std::size_t>> node_rows;
        collect_node_rows(tree, d, node_rows);
        for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
            const auto& n = tree.nodes()[i];
            if (n.is_leaf())
                continue;
            const auto splits = all_splits(d, node_rows[i], min_leaf);
            REQUIRE(!splits.empty());
            double best = splits.front().score;
            for (const auto& s : splits)
                best = std::min(best, s.score);
            const double chosen = gini_of(d, node_rows[std::size_t(n.left)]) + gini_of(d, node_rows[std::size_t(n.right)]);
            CHECK(chosen == doctest::Approx(best).epsilon(1e-12));
        }
    }
}

TEST_CASE("trees: depth bound, leaf distributions, determinism")
{
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const Dataset d = random_mixed(seed, 80);
        const auto rows = bootstrap_indices(d.n(), seed);
        for (int depth : {1, 2, 3, 5}) {
            const auto t = grow_tree(d, rows, {depth, 1});
            CHECK(t.depth() <= depth);
        }
        const auto a = grow_tree(d, rows, {kUnlimitedDepth, 2});
        const auto b = grow_tree(d, rows, {kUnlimitedDepth, 2});
        REQUIRE(a.nodes().size() == b.nodes().size());
        for (std::size_t i = 0; i < a.nodes().size(); ++i) {
            CHECK(a.nodes()[i].feature == b.nodes()[i].feature);
            CHECK(a.nodes()[i].threshold == b.nodes()[i].threshold);
            const auto& n = a.nodes()[i];
            if (n.is_leaf()) {
                double s = 0;
                for (double p : n.distribution)
                    s += p;
                CHECK(std::abs(s - 1.0) <= 1e-9);
            } else {
                CHECK(n.left > 0);
                CHECK(n.right > 0);
            }
        }
        for (std::size_t r = 0; r < d.n(); ++r) {
            const int label = a.predict(d, r);
            CHECK((label >= 0 && std::size_t(label) < d.n_classes()));
        }
    }
}

TEST_CASE("missing values follow the branch that saw more training rows")
{
    const Dataset d = Dataset::from_labels(
        "m", {Column::numeric("x", {1, 2, 3, 10, 11, kMissing})}, {"A", "A", "A", "B", "B", "A"});
    const auto t = grow_tree(d, d.all_rows(), {1, 1});
    const auto& root = t.nodes()[0];
    REQUIRE(!root.is_leaf());
    CHECK(root.missing_left);
    CHECK(t.predict(d, 5) == 0);
}

TEST_CASE("naive bayes separates well-separated Gaussians")
{
    Rng rng(3);
    std::vector<double> x;
    std::vector<std::string> y;
    for (int i = 0; i < 50; ++i) {
        x.push_back(rng.normal(-5, 0.5));
        y.push_back("neg");
        x.push_back(rng.normal(5, 0.5));
        y.push_back("pos");
    }
    const Dataset d = Dataset::from_labels("g", {Column::numeric("x", x)}, y);
    CHECK(train_accuracy(fit_naive_bayes(d, d.all_rows()), d) >= 0.98);
}

TEST_CASE("naive bayes with an uninformative feature predicts the prior mode")
{
    const Dataset d = Dataset::from_labels("u", {Column::numeric("x", {1, 1, 1, 1, 1})}, {"a", "b", "b", "b", "a"});
    const auto p = fit_naive_bayes(d, d.all_rows());
    for (std::size_t r = 0; r < d.n(); ++r)
        CHECK(p.predict(d, r) == 1);
}

TEST_CASE("naive bayes on categorical-only data")
{
    const Dataset d = Dataset::from_labels(
        "c", {Column::categorical("c", {"r", "r", "g", "g", "?", "r"})}, {"x", "x", "y", "y", "x", "x"});
    const auto p = fit_naive_bayes(d, d.all_rows());
    CHECK(p.predict(d, 0) == 0);
    CHECK(p.predict(d, 2) == 1);
    CHECK(p.predict(d, 4) == 0);  // missing feature: prior decides
}

TEST_CASE("majority class")
{
    const Dataset d = Dataset::from_labels("m", {Column::numeric("x", {0, 0, 0})}, {"A", "A", "B"});
    const auto p = fit_majority(d, d.all_rows());
    CHECK(p.predict(d, 2) == 0);

    const Dataset tie = Dataset::from_labels("t", {Column::numeric("x", {0, 0})}, {"B", "A"});
    CHECK(fit_majority(tie, tie.all_rows()).predict(tie, 0) == 0);  // "A" first in label order

    const Dataset r = random_mixed(9, 70);
    const auto counts = r.class_counts();
    const double modal = double(*std::max_element(counts.begin(), counts.end())) / double(r.n());
    CHECK(train_accuracy(fit_majority(r, r.all_rows()), r) == doctest::Approx(modal));
}
