#include "autobagging/evaluation.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

namespace autobagging {

namespace {

struct FoldData {
    MetaDataset train;
    std::vector<MetafeatureVector> held_out;
    std::vector<PerformanceRecord> train_records;
    std::vector<std::string> training_datasets;
};

FoldData prepare_fold(const std::vector<PerformanceRecord>& records, const std::vector<MetafeatureVector>& vectors,
                      const Registry& registry, const std::string& held_out)
{
    FoldData f;
    std::set<std::string> train_ids;
    for (const auto& r : records)
        if (r.dataset_id != held_out) {
            f.train_records.push_back(r);
            train_ids.insert(r.dataset_id);
        }
    f.training_datasets.assign(train_ids.begin(), train_ids.end());
    const auto targets = compute_metatargets(f.train_records);
    const auto ranks = rank_table(targets);

    std::vector<MetafeatureVector> train_vectors;
    for (const auto& v : vectors) {
        auto copy = v;
        refresh_rank_features(copy, ranks, registry);
        if (v.dataset_id == held_out)
            f.held_out.push_back(std::move(copy));
        else
            train_vectors.push_back(std::move(copy));
    }
    f.train = assemble(targets, train_vectors);
    return f;
}

double max_or_neg_inf(double a, double b)
{
    if (is_missing(b))
        return a;
    return std::max(a, b);
}

// Regularized lower incomplete gamma P(a, x) by series, upper Q by continued fraction.
double gamma_p_series(double a, double x)
{
    double sum = 1.0 / a, term = sum, ap = a;
    for (int i = 0; i < 10000; ++i) {
        ap += 1;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-16)
            break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_fraction(double a, double x)
{
    const double tiny = 1e-300;
    double b = x + 1 - a, c = 1 / tiny, d = 1 / b, h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -i * (i - a);
        b += 2;
        d = an * d + b;
        if (std::abs(d) < tiny)
            d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny)
            c = tiny;
        d = 1 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1) < 1e-16)
            break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double gamma_q(double a, double x)
{
    if (x <= 0)
        return 1.0;
    if (x < a + 1)
        return 1.0 - gamma_p_series(a, x);
    return gamma_q_fraction(a, x);
}

double beta_fraction(double a, double b, double x)
{
    const double tiny = 1e-300;
    const double qab = a + b, qap = a + 1, qam = a - 1;
    double c = 1, d = 1 - qab * x / qap;
    if (std::abs(d) < tiny)
        d = tiny;
    d = 1 / d;
    double h = d;
    for (int m = 1; m < 10000; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1 + aa * d;
        if (std::abs(d) < tiny)
            d = tiny;
        c = 1 + aa / c;
        if (std::abs(c) < tiny)
            c = tiny;
        d = 1 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1 + aa * d;
        if (std::abs(d) < tiny)
            d = tiny;
        c = 1 + aa / c;
        if (std::abs(c) < tiny)
            c = tiny;
        d = 1 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1) < 1e-16)
            break;
    }
    return h;
}

// Regularized incomplete beta I_x(a, b).
double beta_inc(double a, double b, double x)
{
    if (x <= 0)
        return 0.0;
    if (x >= 1)
        return 1.0;
    const double front =
        std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x));
    if (x < (a + 1) / (a + b + 2))
        return front * beta_fraction(a, b, x) / a;
    return 1.0 - front * beta_fraction(b, a, 1 - x) / b;
}

std::string csv_number(double v) { return format_double(v); }

} // namespace

double chi2_sf(double x, double df) { return gamma_q(df / 2, x / 2); }

double f_sf(double x, double d1, double d2)
{
    if (std::isinf(x))
        return 0.0;
    if (x <= 0)
        return 1.0;
    return beta_inc(d2 / 2, d1 / 2, d2 / (d2 + d1 * x));
}

GBRanker lodo_fold_model(const std::vector<PerformanceRecord>& records, const std::vector<MetafeatureVector>& vectors,
                         const Registry& registry, const EvalConfig& config, const std::string& held_out)
{
    const auto f = prepare_fold(records, vectors, registry, held_out);
    return train_ranker(f.train, config.ranker, registry.names(), registry.manifest_hash());
}

std::vector<LodoFold> lodo(const std::vector<PerformanceRecord>& records,
                           const std::vector<MetafeatureVector>& vectors, const Registry& registry,
                           const EvalConfig& config)
{
    std::set<std::string> id_set;
    for (const auto& r : records)
        id_set.insert(r.dataset_id);
    const std::vector<std::string> ids(id_set.begin(), id_set.end());
    if (ids.size() < 3)
        throw Error("lodo: need at least three datasets");

    std::vector<LodoFold> folds(ids.size());
    parallel_for(ids.size(), config.workers, [&](std::size_t i) {
        const std::string& held = ids[i];
        const auto data = prepare_fold(records, vectors, registry, held);
        const auto model = train_ranker(data.train, config.ranker, registry.names(), registry.manifest_hash());
        LodoFold& fold = folds[i];
        fold.dataset_id = held;
        fold.training_datasets = data.training_datasets;
        for (const auto& r : rank_workflows(model, data.held_out, registry.manifest_hash())) {
            fold.predicted.push_back(r.workflow_id);
            fold.scores.push_back(r.score);
        }
        fold.average_rank = average_rank_baseline(data.train_records);

        std::vector<PerformanceRecord> mine;
        for (const auto& r : records)
            if (r.dataset_id == held)
                mine.push_back(r);
        const auto targets = compute_metatargets(mine);
        for (std::size_t t = 0; t < mine.size(); ++t) {
            fold.truth_rank[mine[t].workflow_id] = targets[t].rank;
            fold.kappa[mine[t].workflow_id] = mine[t].mean_kappa;
        }
    });
    return folds;
}

std::vector<std::string> relevant_set(const std::map<std::string, double>& truth_rank, int top)
{
    std::vector<std::string> out;
    for (const auto& [id, r] : truth_rank) {
        int better = 0;
        for (const auto& [_, other] : truth_rank)
            if (other < r)
                ++better;
        if (better < top)
            out.push_back(id);
    }
    return out;
}

double average_precision(const std::vector<std::string>& predicted, const std::vector<std::string>& relevant, int k)
{
    if (relevant.empty() || k <= 0)
        return 0.0;
    const std::set<std::string> rel(relevant.begin(), relevant.end());
    double sum = 0;
    int hits = 0;
    for (std::size_t i = 0; i < predicted.size() && i < std::size_t(k); ++i)
        if (rel.count(predicted[i])) {
            ++hits;
            sum += double(hits) / double(i + 1);
        }
    return sum / double(std::min<std::size_t>(rel.size(), std::size_t(k)));
}

double map_at_k(const std::vector<LodoFold>& folds, int k, int relevant_top, bool baseline)
{
    if (folds.empty())
        return kMissing;
    double sum = 0;
    for (const auto& f : folds)
        sum += average_precision(baseline ? f.average_rank : f.predicted, relevant_set(f.truth_rank, relevant_top), k);
    return sum / double(folds.size());
}

std::vector<std::string> average_rank_baseline(const std::vector<PerformanceRecord>& training)
{
    if (training.empty())
        throw Error("average_rank_baseline: empty training table");
    auto sorted = training;
    sort_records(sorted);
    std::map<std::string, std::pair<double, int>> acc;
    for (const auto& t : compute_metatargets(sorted)) {
        auto& a = acc[t.workflow_id];
        a.first += t.rank;
        a.second += 1;
    }
    std::vector<std::pair<double, std::string>> order;
    for (const auto& [id, a] : acc)
        order.push_back({a.first / a.second, id});
    std::sort(order.begin(), order.end());
    std::vector<std::string> out;
    for (auto& [_, id] : order)
        out.push_back(id);
    return out;
}

OracleBaseline oracle_and_bagging100(const std::vector<PerformanceRecord>& records, const std::string& dataset_id)
{
    OracleBaseline out;
    double best = -std::numeric_limits<double>::infinity();
    bool found = false, plain = false;
    for (const auto& r : records) {
        if (r.dataset_id != dataset_id)
            continue;
        found = true;
        best = max_or_neg_inf(best, r.mean_kappa);
        if (r.workflow_id == "100nonenone") {
            out.bagging100 = r.mean_kappa;
            plain = true;
        }
    }
    if (!found)
        throw Error("oracle_and_bagging100: unknown dataset " + dataset_id);
    if (!plain)
        throw Error("oracle_and_bagging100: no 100nonenone row for " + dataset_id);
    out.oracle = std::isinf(best) ? kMissing : best;
    return out;
}

double best_at_n(const std::vector<std::string>& order, const std::map<std::string, double>& kappa, std::size_t n)
{
    if (n < 1 || n > order.size())
        throw Error("best_at_n: n out of range");
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        auto it = kappa.find(order[i]);
        if (it == kappa.end())
            throw Error("best_at_n: no kappa for " + order[i]);
        best = max_or_neg_inf(best, it->second);
    }
    return std::isinf(best) ? kMissing : best;
}

std::vector<double> loss_curve(const std::vector<LodoFold>& folds, bool baseline)
{
    if (folds.empty())
        return {};
    const std::size_t m = folds.front().predicted.size();
    std::vector<double> curve(m, 0.0);
    for (const auto& f : folds) {
        const auto& order = baseline ? f.average_rank : f.predicted;
        if (order.size() != m)
            throw Error("loss_curve: folds rank different numbers of workflows");
        const double top = best_at_n(order, f.kappa, m);
        for (std::size_t n = 1; n <= m; ++n)
            curve[n - 1] += top - best_at_n(order, f.kappa, n);
    }
    for (auto& v : curve)
        v /= double(folds.size());
    return curve;
}

double nemenyi_q(std::size_t k, double alpha)
{
    static const double q05[] = {1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164};
    static const double q10[] = {1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920};
    if (k < 2 || k > 10)
        throw Error("nemenyi_q: tabulated only for 2..10 methods");
    if (std::abs(alpha - 0.05) < 1e-12)
        return q05[k - 2];
    if (std::abs(alpha - 0.10) < 1e-12)
        return q10[k - 2];
    throw Error("nemenyi_q: alpha must be 0.05 or 0.10");
}

CdResult friedman_nemenyi(const std::vector<std::vector<double>>& kappas, const std::vector<std::string>& methods,
                          double alpha)
{
    const std::size_t k = methods.size(), n = kappas.size();
    if (k < 2 || n < 3)
        throw Error("friedman_nemenyi: need at least 2 methods and 3 datasets");
    CdResult out;
    out.methods = methods;
    out.n_datasets = n;
    out.average_ranks.assign(k, 0.0);
    bool all_tied = true;
    for (const auto& row : kappas) {
        if (row.size() != k)
            throw Error("friedman_nemenyi: ragged kappa matrix");
        std::vector<double> v;
        for (double x : row)
            v.push_back(is_missing(x) ? -std::numeric_limits<double>::infinity() : x);
        const auto r = tie_averaged_ranks(v, true);
        for (std::size_t j = 0; j < k; ++j) {
            out.average_ranks[j] += r[j];
            if (v[j] != v[0])
                all_tied = false;
        }
    }
    double sq = 0;
    for (auto& r : out.average_ranks) {
        r /= double(n);
        sq += r * r;
    }
    const double kk = double(k), nn = double(n);
    out.undefined = all_tied;
    out.chi2 = std::max(0.0, 12 * nn / (kk * (kk + 1)) * (sq - kk * (kk + 1) * (kk + 1) / 4));
    out.chi2_p = chi2_sf(out.chi2, kk - 1);
    const double denom = nn * (kk - 1) - out.chi2;
    out.f_stat = denom > 0 ? (nn - 1) * out.chi2 / denom : std::numeric_limits<double>::infinity();
    out.f_p = f_sf(out.f_stat, kk - 1, (kk - 1) * (nn - 1));
    if (all_tied) {
        out.chi2_p = out.f_p = kMissing;
    }
    out.q_alpha = nemenyi_q(k, alpha);
    out.cd = out.q_alpha * std::sqrt(kk * (kk + 1) / (6 * nn));
    return out;
}

BenchmarkReport run_benchmark(const std::vector<PerformanceRecord>& records,
                              const std::vector<MetafeatureVector>& vectors, const Registry& registry,
                              const EvalConfig& config)
{
    BenchmarkReport rep;
    rep.config = config;
    auto sorted = records;
    sort_records(sorted);
    rep.targets = compute_metatargets(sorted);
    rep.folds = lodo(sorted, vectors, registry, config);
    rep.methods = {"autoBagging@1", "autoBagging@3", "autoBagging@5", "average_rank", "bagging100", "oracle"};
    for (const auto& f : rep.folds) {
        const auto ob = oracle_and_bagging100(sorted, f.dataset_id);
        rep.base_kappa.push_back({best_at_n(f.predicted, f.kappa, 1), best_at_n(f.predicted, f.kappa, 3),
                                  best_at_n(f.predicted, f.kappa, 5), best_at_n(f.average_rank, f.kappa, 1),
                                  ob.bagging100, ob.oracle});
        const auto rel = relevant_set(f.truth_rank, config.relevant_top);
        rep.ap_autobagging.push_back(average_precision(f.predicted, rel, config.map_k));
        rep.ap_average_rank.push_back(average_precision(f.average_rank, rel, config.map_k));
    }
    rep.map_autobagging = map_at_k(rep.folds, config.map_k, config.relevant_top, false);
    rep.map_average_rank = map_at_k(rep.folds, config.map_k, config.relevant_top, true);
    rep.loss_autobagging = loss_curve(rep.folds, false);
    rep.loss_average_rank = loss_curve(rep.folds, true);
    rep.cd = friedman_nemenyi(rep.base_kappa, rep.methods, config.alpha);
    return rep;
}

std::vector<std::string> audit(const BenchmarkReport& rep)
{
    std::vector<std::string> bad;
    std::set<std::string> all;
    for (const auto& f : rep.folds)
        all.insert(f.dataset_id);
    for (std::size_t i = 0; i < rep.folds.size(); ++i) {
        const auto& f = rep.folds[i];
        const std::set<std::string> train(f.training_datasets.begin(), f.training_datasets.end());
        auto expected = all;
        expected.erase(f.dataset_id);
        if (train.count(f.dataset_id) || train != expected)
            bad.push_back("leakage: fold " + f.dataset_id + " trained on the held-out dataset or a wrong set");
        std::set<std::string> pred(f.predicted.begin(), f.predicted.end());
        if (pred.size() != f.predicted.size() || f.predicted.size() != f.kappa.size() ||
            !std::all_of(pred.begin(), pred.end(), [&](const auto& id) { return f.kappa.count(id) > 0; }))
            bad.push_back("ranking: fold " + f.dataset_id + " is not a permutation of its workflows");
        const auto& row = rep.base_kappa[i];
        const double oracle = row.back();
        for (std::size_t m = 0; m < row.size(); ++m)
            if (is_missing(row[m]) || row[m] > oracle)
                bad.push_back("oracle dominance: " + rep.methods[m] + " on " + f.dataset_id);
        if (!(row[0] <= row[1] && row[1] <= row[2]))
            bad.push_back("prefix monotonicity: autoBagging@1..5 on " + f.dataset_id);
    }
    for (const auto* curve : {&rep.loss_autobagging, &rep.loss_average_rank}) {
        if (curve->empty() || curve->back() != 0.0)
            bad.push_back("loss curve does not end at 0");
        for (std::size_t n = 1; n < curve->size(); ++n)
            if ((*curve)[n] > (*curve)[n - 1])
                bad.push_back("loss curve increases at n=" + std::to_string(n + 1));
    }
    std::map<std::string, std::pair<double, std::size_t>> sums;
    for (const auto& t : rep.targets) {
        sums[t.dataset_id].first += t.rank;
        sums[t.dataset_id].second += 1;
    }
    for (const auto& [id, s] : sums) {
        const double m = double(s.second);
        if (s.first != m * (m + 1) / 2)
            bad.push_back("rank sum identity fails on " + id);
    }
    return bad;
}

void export_results(const BenchmarkReport& rep, const std::string& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw Error("cannot create " + dir + ": " + ec.message());
    auto path = [&](const char* name) { return (std::filesystem::path(dir) / name).string(); };

    std::ostringstream loss;
    loss << "method,n,loss\n";
    for (std::size_t n = 0; n < rep.loss_autobagging.size(); ++n)
        loss << "autoBagging," << n + 1 << ',' << csv_number(rep.loss_autobagging[n]) << '\n';
    for (std::size_t n = 0; n < rep.loss_average_rank.size(); ++n)
        loss << "average_rank," << n + 1 << ',' << csv_number(rep.loss_average_rank[n]) << '\n';
    write_file_atomic(path("loss_curve.csv"), loss.str());

    std::ostringstream map;
    map << "dataset_id,autoBagging,average_rank\n";
    for (std::size_t i = 0; i < rep.folds.size(); ++i)
        map << csv_escape(rep.folds[i].dataset_id) << ',' << csv_number(rep.ap_autobagging[i]) << ','
            << csv_number(rep.ap_average_rank[i]) << '\n';
    map << "MAP," << csv_number(rep.map_autobagging) << ',' << csv_number(rep.map_average_rank) << '\n';
    write_file_atomic(path("map_meta.csv"), map.str());

    std::ostringstream base;
    base << "dataset_id";
    for (const auto& m : rep.methods)
        base << ',' << m;
    base << '\n';
    for (std::size_t i = 0; i < rep.folds.size(); ++i) {
        base << csv_escape(rep.folds[i].dataset_id);
        for (double v : rep.base_kappa[i])
            base << ',' << csv_number(v);
        base << '\n';
    }
    write_file_atomic(path("base_level_kappa.csv"), base.str());

    nlohmann::ordered_json cd;
    cd["alpha"] = rep.config.alpha;
    cd["n_datasets"] = rep.cd.n_datasets;
    cd["methods"] = rep.cd.methods;
    cd["average_ranks"] = rep.cd.average_ranks;
    cd["friedman"] = {{"chi2", rep.cd.chi2},   {"chi2_p", rep.cd.chi2_p},       {"f", rep.cd.f_stat},
                      {"f_p", rep.cd.f_p},     {"undefined", rep.cd.undefined}};
    cd["q_alpha"] = rep.cd.q_alpha;
    cd["critical_difference"] = rep.cd.cd;
    write_file_atomic(path("cd_diagram.json"), cd.dump(2) + "\n");

    std::ostringstream box;
    box << "dataset_id,workflow_id,rank\n";
    for (const auto& t : rep.targets)
        box << csv_escape(t.dataset_id) << ',' << t.workflow_id << ',' << csv_number(t.rank) << '\n';
    write_file_atomic(path("rank_boxplot.csv"), box.str());
}

} // namespace autobagging
