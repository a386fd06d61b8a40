#include "doctest.h"

#include "autobagging/rank_model.hpp"

#include <cmath>
#include <functional>
#include <numeric>

using namespace autobagging;

namespace {

std::vector<std::size_t> iota_rows(std::size_t n)
{
    std::vector<std::size_t> r(n);
    std::iota(r.begin(), r.end(), std::size_t{0});
    return r;
}

// Meta-dataset whose relevance is a monotone function of feature 0 plus noise features.
MetaDataset planted(std::uint64_t seed, std::size_t groups, std::size_t per_group, std::size_t features,
                    double missing_rate = 0.0)
{
    Rng rng(seed);
    MetaDataset m;
    for (std::size_t gi = 0; gi < groups; ++gi) {
        MetaGroup g;
        g.dataset_id = "g" + std::to_string(100 + gi);
        std::vector<double> signal(per_group);
        for (auto& s : signal)
            s = rng.uniform() * 10;
        const auto ranks = tie_averaged_ranks(signal, true);
        const auto z = ranks_to_relevance(ranks, per_group);
        for (std::size_t i = 0; i < per_group; ++i) {
            MetafeatureVector v{g.dataset_id, "w" + std::to_string(100 + i), std::vector<double>(features)};
            v.values[0] = signal[i];
            for (std::size_t f = 1; f < features; ++f)
                v.values[f] = rng.uniform() < missing_rate ? kMissing : rng.normal();
            g.examples.push_back({v, ranks[i], z[i]});
        }
        m.groups.push_back(std::move(g));
    }
    return m;
}

std::vector<std::string> names(std::size_t n)
{
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back("f" + std::to_string(i));
    return out;
}

double walk(const RegTree& t, int node, std::span<const double> x)
{
    const auto& n = t.nodes[std::size_t(node)];
    if (n.feature < 0)
        return n.weight;
    const double v = x[std::size_t(n.feature)];
    if (std::isnan(v))
        return walk(t, n.default_left ? n.left : n.right, x);
    return walk(t, v < n.threshold ? n.left : n.right, x);
}

} // namespace

TEST_CASE("pairwise gradient examples")
{
    std::vector<double> g(2), h(2);
    pairwise_gradients(std::vector<double>{0, 0}, std::vector<int>{2, 1}, g, h);
    CHECK(g == std::vector<double>{-0.5, 0.5});
    CHECK(h == std::vector<double>{0.25, 0.25});
    pairwise_gradients(std::vector<double>{0.3, -1}, std::vector<int>{4, 4}, g, h);
    CHECK(g == std::vector<double>{0, 0});
    CHECK(h == std::vector<double>{0, 0});
    std::vector<double> g3(3), h3(3);
    pairwise_gradients(std::vector<double>{0, 0, 0}, std::vector<int>{3, 2, 1}, g3, h3);
    CHECK(g3[0] == doctest::Approx(-1.0));
    CHECK(g3[1] == doctest::Approx(0.0));
    CHECK(g3[2] == doctest::Approx(1.0));
}

TEST_CASE("pairwise gradients match central finite differences")
{
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.below(12);
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = rng.normal(0, 2);
            y[i] = int(rng.below(5));
        }
        std::vector<double> g(n), h(n);
        pairwise_gradients(s, y, g, h);
        CHECK(std::accumulate(g.begin(), g.end(), 0.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
        const double eps = 1e-4;
        for (std::size_t i = 0; i < n; ++i) {
            auto at = [&](double delta) {
                auto t = s;
                t[i] += delta;
                return pairwise_loss(t, y);
            };
            const double fd_g = (at(eps) - at(-eps)) / (2 * eps);
            const double fd_h = (at(eps) - 2 * at(0) + at(-eps)) / (eps * eps);
            CHECK(std::abs(g[i] - fd_g) <= 1e-4 * std::max(1.0, std::abs(fd_g)));
            CHECK(std::abs(h[i] - fd_h) <= 1e-4 * std::max(1.0, std::abs(fd_h)));
        }
    }
}

TEST_CASE("regression tree examples")
{
    TreeConfig tc{4, 1.0, 1.0};
    SUBCASE("equal gradients give a single leaf")
    {
        Eigen::MatrixXd x(4, 1);
        x << 1, 2, 3, 4;
        const std::vector<double> g(4, 0.5), h(4, 1.0);
        const auto t = fit_tree_to_gradients(x, g, h, iota_rows(4), tc);
        REQUIRE(t.nodes.size() == 1);
        CHECK(t.nodes[0].weight == doctest::Approx(-2.0 / 5.0));
    }
    SUBCASE("one feature, opposite gradients")
    {
        Eigen::MatrixXd x(4, 1);
        x << 1, 2, 3, 4;
        const std::vector<double> g{-1, -1, 1, 1}, h(4, 1.0);
        // Thresholds 1.5, 2.5, 3.5 have gains 3/8, 4/3, 3/8.
        CHECK(split_gain(-1, 1, 1, 3, 1) == doctest::Approx(0.375));
        CHECK(split_gain(-2, 2, 2, 2, 1) == doctest::Approx(4.0 / 3));
        const auto t = fit_tree_to_gradients(x, g, h, iota_rows(4), TreeConfig{1, 1.0, 1.0});
        REQUIRE(t.nodes.size() == 3);
        CHECK(t.nodes[0].threshold == 2.5);
        CHECK(t.nodes[std::size_t(t.nodes[0].left)].weight == doctest::Approx(2.0 / 3));
        CHECK(t.nodes[std::size_t(t.nodes[0].right)].weight == doctest::Approx(-2.0 / 3));
    }
    SUBCASE("missing rows with negative gradients follow the negative child")
    {
        Eigen::MatrixXd x(6, 1);
        x << 1, 2, 3, 4, kMissing, kMissing;
        const std::vector<double> g{-1, -1, 1, 1, -1, -1}, h(6, 1.0);
        const auto t = fit_tree_to_gradients(x, g, h, iota_rows(6), TreeConfig{1, 1.0, 1.0});
        REQUIRE(t.nodes.size() == 3);
        CHECK(t.nodes[0].default_left);
        x << 3, 4, 1, 2, kMissing, kMissing;
        const auto u = fit_tree_to_gradients(x, g, h, iota_rows(6), TreeConfig{1, 1.0, 1.0});
        CHECK_FALSE(u.nodes[0].default_left);
    }
    SUBCASE("min_child_weight rejects small children")
    {
        Eigen::MatrixXd x(4, 1);
        x << 1, 2, 3, 4;
        const std::vector<double> g{-1, -1, 1, 1}, h(4, 1.0);
        CHECK(fit_tree_to_gradients(x, g, h, iota_rows(4), TreeConfig{3, 1.0, 2.5}).nodes.size() == 1);
    }
}

TEST_CASE("default directions and splits are brute-force optimal on small toys")
{
    Rng rng(23);
    int checked = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const Eigen::Index n = 4 + Eigen::Index(rng.below(17)), p = 1 + Eigen::Index(rng.below(3));
        Eigen::MatrixXd x(n, p);
        std::vector<double> g(static_cast<std::size_t>(n)), h(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index f = 0; f < p; ++f)
                x(i, f) = rng.uniform() < 0.3 ? kMissing : double(rng.below(5));
            g[std::size_t(i)] = rng.normal();
            h[std::size_t(i)] = 0.05 + rng.uniform();
        }
        const TreeConfig tc{3, 0.5 + rng.uniform(), 0.2 * double(rng.below(3))};
        const auto t = fit_tree_to_gradients(x, g, h, iota_rows(std::size_t(n)), tc);

        // Route rows and audit every node.
        std::function<void(int, std::vector<Eigen::Index>)> audit = [&](int id, std::vector<Eigen::Index> rows) {
            const auto& node = t.nodes[std::size_t(id)];
            double G = 0, H = 0;
            for (auto r : rows) {
                G += g[std::size_t(r)];
                H += h[std::size_t(r)];
            }
            CHECK(node.weight == doctest::Approx(-G / (H + tc.lambda)));
            // Exhaustive search over (feature, threshold, direction).
            double best = 0;
            int bf = -1;
            double bt = 0;
            bool bl = true;
            for (Eigen::Index f = 0; f < p; ++f)
                for (double thr = 0.5; thr < 4.0; thr += 1.0) {
                    bool any_lo = false, any_hi = false;
                    for (auto r : rows)
                        if (!std::isnan(x(r, f)))
                            (x(r, f) < thr ? any_lo : any_hi) = true;
                    if (!any_lo || !any_hi)
                        continue;
                    for (bool left : {true, false}) {
                        double gl = 0, hl = 0;
                        for (auto r : rows) {
                            const double v = x(r, f);
                            if (std::isnan(v) ? left : v < thr) {
                                gl += g[std::size_t(r)];
                                hl += h[std::size_t(r)];
                            }
                        }
                        if (hl < tc.min_child_weight || H - hl < tc.min_child_weight)
                            continue;
                        const double gain = split_gain(gl, hl, G - gl, H - hl, tc.lambda);
                        if (gain > best + 1e-12 * (1 + best)) {
                            best = gain;
                            bf = int(f);
                            bt = thr;
                            bl = left;
                        }
                    }
                }
            if (node.feature < 0) {
                if (rows.size() >= 2 && t.depth() < tc.max_depth)
                    CHECK(bf < 0);
                return;
            }
            ++checked;
            CHECK(node.feature == bf);
            CHECK(node.default_left == bl);
            CHECK(node.gain == doctest::Approx(best));
            // Thresholds are midpoints between the integer levels present, so they
            // select the same partition as the brute-force half-integer grid.
            std::vector<Eigen::Index> lo, hi;
            for (auto r : rows) {
                const double v = x(r, node.feature);
                (std::isnan(v) ? node.default_left : v < node.threshold) ? lo.push_back(r) : hi.push_back(r);
            }
            for (auto r : rows) {
                const double v = x(r, bf);
                if (!std::isnan(v))
                    CHECK((v < node.threshold) == (v < bt));
            }
            audit(node.left, lo);
            audit(node.right, hi);
        };
        std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
        std::iota(all.begin(), all.end(), Eigen::Index{0});
        audit(0, all);
    }
    CHECK(checked > 200);
}

TEST_CASE("training behaviour")
{
    const auto data = planted(5, 8, 30, 4, 0.2);
    SUBCASE("zero rounds give a constant model")
    {
        RankerConfig c;
        c.rounds = 0;
        const auto m = train_ranker(data, c, names(4), "h");
        CHECK(m.trees.empty());
        CHECK(m.score(data.groups[0].examples[0].x.values) == m.base_score);
    }
    SUBCASE("planted monotone signal is recovered")
    {
        RankerConfig c;
        c.rounds = 50;
        c.max_depth = 3;
        const auto m = train_ranker(data, c, names(4), "h");
        const auto test = planted(99, 4, 30, 4, 0.2);
        for (const auto& g : test.groups) {
            std::vector<double> s, y;
            for (const auto& e : g.examples) {
                s.push_back(m.score(e.x.values));
                y.push_back(e.relevance);
            }
            CHECK(kendall_tau(s, y) >= 0.9);
        }
        const auto gain = feature_gain(m);
        CHECK(gain[0] > 0.5);
        CHECK(std::accumulate(gain.begin(), gain.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("training loss does not increase over 200 rounds")
    {
        RankerConfig c;
        std::vector<double> trace;
        train_ranker(data, c, names(4), "h", &trace);
        REQUIRE(trace.size() == 201);
        for (std::size_t i = 1; i < trace.size(); ++i)
            CHECK(trace[i] <= trace[i - 1] + 1e-9 * trace[i - 1]);
        CHECK(trace.back() < 0.5 * trace.front());
    }
    SUBCASE("larger L2 penalty never enlarges first-tree leaves")
    {
        RankerConfig a, b;
        a.rounds = b.rounds = 1;
        b.lambda = 2 * a.lambda;
        const auto ma = train_ranker(data, a, names(4), "h"), mb = train_ranker(data, b, names(4), "h");
        double wa = 0, wb = 0;
        for (const auto& n : ma.trees[0].nodes)
            if (n.feature < 0)
                wa = std::max(wa, std::abs(n.weight));
        for (const auto& n : mb.trees[0].nodes)
            if (n.feature < 0)
                wb = std::max(wb, std::abs(n.weight));
        CHECK(wb <= wa);
    }
    SUBCASE("subsampling is seeded")
    {
        RankerConfig c;
        c.rounds = 10;
        c.subsample = 0.5;
        c.seed = 3;
        const auto m1 = train_ranker(data, c, names(4), "h"), m2 = train_ranker(data, c, names(4), "h");
        CHECK(m1.to_json() == m2.to_json());
        c.seed = 4;
        CHECK(train_ranker(data, c, names(4), "h").to_json() != m1.to_json());
    }
    SUBCASE("invalid inputs")
    {
        MetaDataset one;
        one.groups.push_back(data.groups[0]);
        CHECK_THROWS_AS(train_ranker(one, {}, names(4), "h"), Error);
        auto empty = data;
        empty.groups[1].examples.clear();
        CHECK_THROWS_AS(train_ranker(empty, {}, names(4), "h"), Error);
    }
}

TEST_CASE("scoring, ranking and persistence")
{
    const auto data = planted(8, 6, 20, 3, 0.3);
    RankerConfig c;
    c.rounds = 30;
    const auto m = train_ranker(data, c, names(3), "abc");
    const auto& ex = data.groups[0].examples;

    for (const auto& e : ex) {
        double s = 0;
        for (const auto& t : m.trees)
            s += walk(t, 0, e.x.values);
        CHECK(m.score(e.x.values) == doctest::Approx(m.base_score + c.eta * s).epsilon(1e-12));
    }
    const std::vector<double> blank(3, kMissing);
    CHECK(std::isfinite(m.score(blank)));
    CHECK_THROWS_AS(m.score(ex[0].x, "other"), Error);

    std::vector<MetafeatureVector> vecs;
    for (const auto& e : ex)
        vecs.push_back(e.x);
    const auto ranked = rank_workflows(m, vecs, "abc");
    REQUIRE(ranked.size() == vecs.size());
    for (std::size_t i = 1; i < ranked.size(); ++i)
        CHECK((ranked[i - 1].score > ranked[i].score ||
               (ranked[i - 1].score == ranked[i].score && ranked[i - 1].workflow_id < ranked[i].workflow_id)));
    auto shifted = m;
    shifted.base_score += 5;
    const auto ranked2 = rank_workflows(shifted, vecs, "abc");
    for (std::size_t i = 0; i < ranked.size(); ++i)
        CHECK(ranked[i].workflow_id == ranked2[i].workflow_id);
    auto dup = vecs;
    dup.push_back(vecs[0]);
    CHECK_THROWS_AS(rank_workflows(m, dup, "abc"), Error);

    RankerConfig none;
    none.rounds = 0;
    const auto flat = train_ranker(data, none, names(3), "abc");
    auto shuffled = vecs;
    std::reverse(shuffled.begin(), shuffled.end());
    const auto tied = rank_workflows(flat, shuffled, "abc");
    for (std::size_t i = 1; i < tied.size(); ++i)
        CHECK(tied[i - 1].workflow_id < tied[i].workflow_id);

    const auto back = GBRanker::from_json(m.to_json());
    CHECK(back.to_json() == m.to_json());
    for (const auto& e : ex)
        CHECK(back.score(e.x.values) == m.score(e.x.values));
    CHECK_THROWS_AS(GBRanker::from_json("{}"), Error);
}

TEST_CASE("feature gain")
{
    MetaDataset d = planted(2, 4, 15, 1);
    RankerConfig c;
    c.rounds = 5;
    const auto m = train_ranker(d, c, names(1), "h");
    CHECK(feature_gain(m) == std::vector<double>{1.0});
    const auto d3 = planted(2, 4, 15, 3);
    MetaDataset only_first = d3;
    for (auto& g : only_first.groups)
        for (auto& e : g.examples)
            e.x.values[2] = 0.0;  // constant, cannot split
    const auto m3 = train_ranker(only_first, c, names(3), "h");
    const auto gain = feature_gain(m3);
    CHECK(gain[2] == 0.0);
    CHECK(std::accumulate(gain.begin(), gain.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    const auto csv = importance_to_csv(m3);
    CHECK(csv.rfind("feature,gain\n", 0) == 0);
}

TEST_CASE("kendall tau")
{
    CHECK(kendall_tau(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 1.0);
    CHECK(kendall_tau(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) == -1.0);
    CHECK(kendall_tau(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}) ==
          doctest::Approx(4.0 / 6.0));
}
