#include "doctest.h"

#include "autobagging/metadatabase.hpp"

#include <cmath>
#include <numeric>

using namespace autobagging;

namespace {

Dataset toy(const std::string& id, std::uint64_t seed, std::size_t n, double gap)
{
    Rng rng(seed);
    std::vector<double> a(n), b(n);
    std::vector<std::string> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = int(i % 3);
        a[i] = rng.normal(gap * cls, 1.0);
        b[i] = rng.normal(0, 1.0) + (cls == 2 ? gap : 0.0);
        y[i] = std::to_string(cls);
    }
    auto d = Dataset::from_labels(id, {Column::numeric("a", a), Column::numeric("b", b)}, y);
    return d;
}

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

bool same_records(const std::vector<PerformanceRecord>& x, const std::vector<PerformanceRecord>& y)
{
    if (x.size() != y.size())
        return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i].dataset_id != y[i].dataset_id || x[i].workflow_id != y[i].workflow_id ||
            !same(x[i].mean_kappa, y[i].mean_kappa) || x[i].flagged != y[i].flagged || x[i].note != y[i].note ||
            x[i].fold_kappas.size() != y[i].fold_kappas.size())
            return false;
        for (std::size_t f = 0; f < x[i].fold_kappas.size(); ++f)
            if (!same(x[i].fold_kappas[f], y[i].fold_kappas[f]))
                return false;
    }
    return true;
}

struct Built {
    std::vector<Dataset> data;
    std::vector<PerformanceRecord> records;
};

const Built& built()
{
    static const Built b = [] {
        Built out;
        out.data = {toy("beta", 2, 48, 0.8), toy("alpha", 1, 48, 1.5)};
        BuildOptions o;
        o.seed = 11;
        const auto grid = enumerate_workflows();
        out.records = build_performance_table(out.data, grid, o);
        return out;
    }();
    return b;
}

} // namespace

TEST_CASE("performance table covers every cell and is deterministic")
{
    const auto& b = built();
    CHECK(b.records.size() == 126);
    CHECK(b.records.front().dataset_id == "alpha");
    for (const auto& r : b.records) {
        CHECK(r.fold_kappas.size() == 4);
        CHECK(r.mean_kappa >= -1.0);
        CHECK(r.mean_kappa <= 1.0);
        CHECK_FALSE(r.flagged);
    }
    BuildOptions o;
    o.seed = 11;
    o.workers = 3;
    const auto grid = enumerate_workflows();
    CHECK(same_records(build_performance_table(b.data, grid, o), b.records));
}

TEST_CASE("performance records match single-workflow evaluation")
{
    const auto& b = built();
    BuildOptions o;
    o.seed = 11;
    const auto& d = b.data[1];
    for (const char* id : {"100nonenone", "50bb0.75knora-e", "200mdsq0.25ola"}) {
        const auto cv = evaluate_workflow_cv(parse_workflow_id(id), d, dataset_folds(d, o), dataset_cv_seed(d.id, 11));
        const auto it = std::find_if(b.records.begin(), b.records.end(),
                                     [&](const auto& r) { return r.dataset_id == d.id && r.workflow_id == id; });
        REQUIRE(it != b.records.end());
        CHECK(it->fold_kappas == cv.fold_kappas);
        CHECK(it->mean_kappa == cv.mean_kappa);
    }
}

TEST_CASE("resuming from a partial table computes only the missing cells")
{
    const auto& b = built();
    std::vector<PerformanceRecord> partial;
    for (std::size_t i = 0; i < b.records.size(); i += 2)
        partial.push_back(b.records[i]);
    BuildOptions o;
    o.seed = 11;
    std::size_t fresh = 0;
    const auto grid = enumerate_workflows();
    const auto resumed = build_performance_table(b.data, grid, o, partial,
                                                 [&](const auto& recs) { fresh += recs.size(); });
    CHECK(fresh == b.records.size() - partial.size());
    CHECK(same_records(resumed, b.records));
    std::size_t none = 0;
    build_performance_table(b.data, grid, o, b.records, [&](const auto& recs) { none += recs.size(); });
    CHECK(none == 0);
}

TEST_CASE("a failing dataset is flagged rather than dropped")
{
    BuildOptions o;
    const auto tiny = toy("tiny", 3, 3, 1.0);
    const auto grid = enumerate_workflows();
    const auto recs = build_performance_table({tiny}, std::span(grid).first(5), o);
    REQUIRE(recs.size() == 5);
    for (const auto& r : recs) {
        CHECK(r.flagged);
        CHECK(r.note.rfind("failed: ", 0) == 0);
        CHECK(std::isnan(r.mean_kappa));
    }
}

TEST_CASE("ranks and relevance")
{
    auto recs = [](std::vector<double> k) {
        std::vector<PerformanceRecord> out;
        for (double v : k)
            out.push_back({"d", "w", {}, v, false, {}});
        return out;
    };
    CHECK(compute_ranks(recs({0.9, 0.5, 0.1})) == std::vector<double>{1, 2, 3});
    CHECK(compute_ranks(recs({0.9, 0.9, 0.1})) == std::vector<double>{1.5, 1.5, 3});
    CHECK(compute_ranks(recs({0.2, kMissing, 0.1})) == std::vector<double>{1, 3, 2});
    CHECK(ranks_to_relevance(std::vector<double>{1, 63, 1.5, 1.5}) == std::vector<int>{63, 1, 62, 62});

    const auto& b = built();
    const auto targets = compute_metatargets(b.records);
    REQUIRE(targets.size() == 126);
    for (std::size_t g = 0; g < 2; ++g) {
        double sum = 0, best = -2;
        int best_label = 0, max_label = 0;
        for (std::size_t i = g * 63; i < (g + 1) * 63; ++i) {
            sum += targets[i].rank;
            max_label = std::max(max_label, targets[i].relevance);
            if (b.records[i].mean_kappa > best) {
                best = b.records[i].mean_kappa;
                best_label = targets[i].relevance;
            }
            for (std::size_t j = g * 63; j < (g + 1) * 63; ++j)
                if (targets[i].rank < targets[j].rank)
                    CHECK(targets[i].relevance >= targets[j].relevance);
        }
        CHECK(sum == 2016.0);
        CHECK(best_label == max_label);
    }
}

TEST_CASE("assemble joins targets with vectors and survives persistence")
{
    const auto& b = built();
    const auto registry = build_registry();
    const auto targets = compute_metatargets(b.records);
    std::vector<MetafeatureVector> vectors;
    BuildOptions o;
    o.seed = 11;
    const auto ranks = rank_table(targets);
    for (const auto& d : b.data) {
        const auto profile = profile_dataset(d, dataset_folds(d, o), registry);
        for (const auto& c : enumerate_workflows())
            vectors.push_back(compute_vector(profile, c, ranks, registry));
    }
    const auto meta = assemble(targets, vectors);
    REQUIRE(meta.size() == 2);
    for (std::size_t g = 0; g < 2; ++g) {
        CHECK(meta.groups[g].examples.size() == 63);
        std::vector<double> rk;
        std::vector<int> labels;
        for (const auto& e : meta.groups[g].examples) {
            rk.push_back(e.rank);
            labels.push_back(e.relevance);
        }
        CHECK(labels == ranks_to_relevance(rk));
    }
    CHECK(meta.groups[0].dataset_id == "alpha");

    const auto perf_csv = performance_to_csv(b.records, 4);
    const auto target_csv = metatargets_to_csv(targets);
    const auto mf_csv = metafeatures_to_csv(vectors, registry);
    const auto perf_back = performance_from_csv(perf_csv);
    CHECK(same_records(perf_back, b.records));
    CHECK(performance_to_csv(perf_back, 4) == perf_csv);
    const auto reloaded = assemble(metatargets_from_csv(target_csv), metafeatures_from_csv(mf_csv, registry));
    for (std::size_t g = 0; g < 2; ++g)
        for (std::size_t i = 0; i < 63; ++i) {
            const auto& x = meta.groups[g].examples[i];
            const auto& y = reloaded.groups[g].examples[i];
            CHECK(x.rank == y.rank);
            CHECK(x.relevance == y.relevance);
            CHECK(std::equal(x.x.values.begin(), x.x.values.end(), y.x.values.begin(), same));
        }

    auto short_vectors = vectors;
    short_vectors.pop_back();
    CHECK_THROWS_AS(assemble(targets, short_vectors), Error);
    auto extra = vectors;
    extra.push_back(vectors.front());
    extra.back().dataset_id = "ghost";
    CHECK_THROWS_AS(assemble(targets, extra), Error);
}
