#include "doctest.h"

#include "autobagging/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

using namespace autobagging;

namespace {

Dataset two_class(std::size_t n_a, std::size_t n_b)
{
    std::vector<double> x;
    std::vector<std::string> y;
    for (std::size_t i = 0; i < n_a; ++i) {
        x.push_back(double(i));
        y.push_back("A");
    }
    for (std::size_t i = 0; i < n_b; ++i) {
        x.push_back(100.0 + double(i));
        y.push_back("B");
    }
    return Dataset::from_labels("toy", {Column::numeric("x", x)}, y);
}

void check_stratified(const Dataset& d, const FoldAssignment& fa)
{
    for (std::size_t c = 0; c < d.n_classes(); ++c) {
        std::vector<int> per_fold(static_cast<std::size_t>(fa.k), 0);
        for (std::size_t i = 0; i < d.n(); ++i)
            if (static_cast<std::size_t>(d.target[i]) == c)
                ++per_fold[static_cast<std::size_t>(fa.fold_of[i])];
        const auto [lo, hi] = std::minmax_element(per_fold.begin(), per_fold.end());
        CHECK(*hi - *lo <= 1);
    }
}

} // namespace

TEST_CASE("load_csv reads a small numeric table")
{
    const std::string text = "a,b,label\n1,2,yes\n3,4,no\n5,6,yes\n7,8,no\n";
    const Dataset d = parse_csv(text, "label");
    CHECK(d.n() == 4);
    CHECK(d.n_classes() == 2);
    CHECK(d.n_features() == 2);
    CHECK(d.features[0].is_numeric());
    CHECK(d.class_labels == std::vector<std::string>{"no", "yes"});
}

TEST_CASE("question mark marks a missing categorical entry")
{
    const std::string text = "c,y\na,0\nb,1\n?,0\na,1\n";
    const Dataset d = parse_csv(text, "y");
    REQUIRE(d.n_features() == 1);
    const Column& c = d.features[0];
    CHECK(c.kind == ColumnKind::categorical);
    CHECK(c.missing_count() == 1);
    CHECK(c.vocabulary == std::vector<std::string>{"a", "b"});
}

TEST_CASE("iris-format file: counts agree with an independent line and field count")
{
    std::ostringstream csv;
    csv << "sepal_length,sepal_width,petal_length,petal_width,species\n";
    const char* species[] = {"setosa", "versicolor", "virginica"};
    Rng rng(7);
    for (int i = 0; i < 150; ++i)
        csv << 4.0 + rng.uniform() * 3 << "," << 2.0 + rng.uniform() << "," << 1.0 + rng.uniform() * 5 << ","
            << rng.uniform() * 2 << "," << species[i / 50] << "\n";
    const std::string text = csv.str();

    const auto lines = std::count(text.begin(), text.end(), '\n') - 1;
    const auto header_end = text.find('\n');
    const auto fields = std::count(text.begin(), text.begin() + long(header_end), ',') + 1;
    std::set<std::string> labels;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line))
        labels.insert(line.substr(line.rfind(',') + 1));

    const Dataset d = parse_csv(text, "species");
    CHECK(d.n() == std::size_t(lines));
    CHECK(d.n_features() + 1 == std::size_t(fields));
    CHECK(d.n_classes() == labels.size());
    CHECK(d.n() == 150);
    CHECK(d.n_classes() == 3);
}

TEST_CASE("load_csv error paths")
{
    CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", "y"), Error);
    CHECK_THROWS_AS(parse_csv("a,b\n1,2\n", "y"), Error);
    CHECK_THROWS_AS(parse_csv("a,y\n1,k\n2,k\n", "y"), Error);
}

TEST_CASE("rows with a missing target are dropped and counted")
{
    const Dataset d = parse_csv("a,y\n1,p\n2,NA\n3,q\n4,\n", "y");
    CHECK(d.n() == 2);
    CHECK(d.dropped_rows == 2);
}

TEST_CASE("schema hints override inferred kinds")
{
    const Dataset d = parse_csv("code,y\n1,p\n2,q\n1,q\n", "y", {{"code", ColumnKind::categorical}});
    CHECK(d.features[0].kind == ColumnKind::categorical);
    CHECK(d.features[0].category_count() == 2);
}

TEST_CASE("csv round trip preserves content")
{
    const std::string text = "a,c,y\n1.5,u,p\n?,v,q\n-2,?,p\n";
    const Dataset d = parse_csv(text, "y");
    const Dataset again = parse_csv(to_csv(d), "y", {}, d.id);
    CHECK(again.content_hash() == d.content_hash());
}

TEST_CASE("eligibility boundaries")
{
    auto make = [](std::size_t n, std::size_t features) {
        Dataset d;
        d.id = "x";
        d.class_labels = {"a", "b"};
        d.target.assign(n, 0);
        d.target[0] = 1;
        d.features.resize(features);
        return d;
    };
    CHECK(check_eligibility(make(300, 10)) == Eligibility::eligible);
    CHECK(check_eligibility(make(299, 10)) == Eligibility::too_small);
    CHECK(check_eligibility(make(1000, 1001)) == Eligibility::too_wide);
    CHECK(check_eligibility(make(5000, 1000)) == Eligibility::eligible);
    CHECK(check_eligibility(make(5001, 3)) == Eligibility::too_large);
}

TEST_CASE("stratified folds: exact divisibility")
{
    const Dataset d = two_class(4, 4);
    const auto fa = stratified_folds(d, 4, 1);
    for (int f = 0; f < 4; ++f) {
        const auto rows = fa.test_rows(f);
        REQUIRE(rows.size() == 2);
        const auto counts = d.class_counts(rows);
        CHECK(counts[0] == 1);
        CHECK(counts[1] == 1);
    }
}

TEST_CASE("stratified folds: imbalanced classes stay within one")
{
    const Dataset d = two_class(7, 3);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto fa = stratified_folds(d, 4, seed);
        check_stratified(d, fa);
        for (int f : fa.fold_of)
            CHECK((f >= 0 && f < 4));
    }
}

TEST_CASE("stratified folds: determinism and partition")
{
    const Dataset d = two_class(37, 23);
    const auto a = stratified_folds(d, 4, 99);
    const auto b = stratified_folds(d, 4, 99);
    CHECK(a.fold_of == b.fold_of);
    std::size_t covered = 0;
    for (int f = 0; f < 4; ++f)
        covered += a.test_rows(f).size();
    CHECK(covered == d.n());
    CHECK_THROWS_AS(stratified_folds(two_class(2, 1), 4, 0), Error);
}

TEST_CASE("stratified folds follow rows under permutation")
{
    const Dataset d = two_class(13, 9);
    std::vector<std::size_t> perm = d.all_rows();
    Rng rng(5);
    rng.shuffle(perm);
    const Dataset p = select_rows(d, perm);
    const auto fa = stratified_folds(d, 4, 3);
    const auto fp = stratified_folds(p, 4, 3);
    for (std::size_t i = 0; i < perm.size(); ++i)
        CHECK(fp.fold_of[i] == fa.fold_of[perm[i]]);
}

TEST_CASE("bootstrap indices")
{
    CHECK(bootstrap_indices(1, 123) == std::vector<std::size_t>{0});

    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto idx = bootstrap_indices(1000, seed);
        std::set<std::size_t> distinct(idx.begin(), idx.end());
        const double frac = double(distinct.size()) / 1000.0;
        CHECK(std::abs(frac - (1.0 - std::exp(-1.0))) <= 0.05);
        for (auto i : idx)
            CHECK(i < 1000);
    }
    CHECK(bootstrap_indices(50, 1) == bootstrap_indices(50, 1));
    CHECK(bootstrap_indices(50, 1) != bootstrap_indices(50, 2));
}

TEST_CASE("encode standardizes with the population deviation")
{
    const Dataset d = Dataset::from_labels("e", {Column::numeric("x", {1, 2, 3})}, {"a", "b", "a"});
    const auto rows = d.all_rows();
    const auto view = encode(d, rows);
    const double s = std::sqrt(1.5);  // (x - 2) / sqrt(2/3)
    CHECK(view.matrix(0, 0) == doctest::Approx(-s).epsilon(1e-12));
    CHECK(view.matrix(1, 0) == doctest::Approx(0.0));
    CHECK(view.matrix(2, 0) == doctest::Approx(s).epsilon(1e-12));
    CHECK(view.matrix(0, 0) == doctest::Approx(-1.2247).epsilon(1e-4));
}

TEST_CASE("encode: constant columns, one-hot blocks and missing entries")
{
    const Dataset d = Dataset::from_labels(
        "e",
        {Column::numeric("k", {4, 4, 4, 4}), Column::categorical("c", {"a", "b", "?", "a"}),
         Column::numeric("m", {1.0, kMissing, 3.0, 5.0})},
        {"p", "q", "p", "q"});
    const auto rows = d.all_rows();
    const auto view = encode(d, rows);
    REQUIRE(view.matrix.cols() == 4);
    CHECK(view.matrix.col(0).isZero());
    for (int i : {0, 1, 3})
        CHECK(view.matrix(i, 1) + view.matrix(i, 2) == 1.0);
    CHECK(view.matrix(2, 1) + view.matrix(2, 2) == 0.0);
    CHECK(view.matrix(1, 3) == 0.0);
    CHECK(view.provenance[2].category == 1);
}

TEST_CASE("encode: fit-row statistics and idempotence")
{
    Rng rng(11);
    std::vector<double> x(200);
    std::vector<std::string> y(200);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.normal(5.0, 3.0);
        y[i] = i % 2 ? "a" : "b";
    }
    const Dataset d = Dataset::from_labels("s", {Column::numeric("x", x)}, y);
    std::vector<std::size_t> fit;
    for (std::size_t i = 0; i < 120; ++i)
        fit.push_back(i);
    const auto a = encode(d, fit);
    const auto b = encode(d, fit);
    CHECK(a.matrix == b.matrix);

    Eigen::VectorXd fitted(static_cast<Eigen::Index>(fit.size()));
    for (std::size_t i = 0; i < fit.size(); ++i)
        fitted(static_cast<Eigen::Index>(i)) = a.matrix(static_cast<Eigen::Index>(fit[i]), 0);
    const double mean = fitted.mean();
    const double sd = std::sqrt((fitted.array() - mean).square().mean());
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(sd - 1.0) < 1e-9);
}
