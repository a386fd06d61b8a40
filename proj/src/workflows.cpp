#include "autobagging/workflows.hpp"

#include "autobagging/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>

#include "json.hpp"

namespace autobagging {

std::size_t kept_models(const WorkflowConfig& c, const WorkflowParams& p)
{
    if (c.pruning == Pruning::none)
        return static_cast<std::size_t>(c.n_models);
    const int kept_percent = p.cut_removes ? 100 - c.cut_percent : c.cut_percent;
    // Integer ceiling avoids 0.25 * 100 rounding up to 26.
    const int kept = (kept_percent * c.n_models + 99) / 100;
    return static_cast<std::size_t>(std::max(kept, 1));
}

std::vector<WorkflowConfig> enumerate_workflows()
{
    std::vector<WorkflowConfig> out;
    for (int n : {50, 100, 200})
        for (Integration integ : {Integration::vote, Integration::ola, Integration::knora_e}) {
            out.push_back({n, Pruning::none, 0, integ});
            for (Pruning p : {Pruning::mdsq, Pruning::bb})
                for (int cut : {25, 50, 75})
                    out.push_back({n, p, cut, integ});
        }
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return workflow_id(a) < workflow_id(b); });
    return out;
}

std::string to_string(Pruning p)
{
    switch (p) {
    case Pruning::none: return "none";
    case Pruning::mdsq: return "mdsq";
    case Pruning::bb: return "bb";
    }
    return "?";
}

std::string to_string(Integration i)
{
    switch (i) {
    case Integration::vote: return "none";
    case Integration::ola: return "ola";
    case Integration::knora_e: return "knora-e";
    }
    return "?";
}

namespace {

std::string cut_token(int percent)
{
    switch (percent) {
    case 25: return "0.25";
    case 50: return "0.5";
    case 75: return "0.75";
    }
    throw Error("invalid cut point " + std::to_string(percent) + "%");
}

bool consume(std::string_view& s, std::string_view token)
{
    if (s.substr(0, token.size()) != token)
        return false;
    s.remove_prefix(token.size());
    return true;
}

} // namespace

std::string workflow_id(const WorkflowConfig& c)
{
    std::string id = std::to_string(c.n_models) + to_string(c.pruning);
    if (c.pruning != Pruning::none)
        id += cut_token(c.cut_percent);
    return id + to_string(c.integration);
}

WorkflowConfig parse_workflow_id(std::string_view id)
{
    const std::string original(id);
    auto fail = [&]() -> WorkflowConfig { throw Error("malformed workflow id '" + original + "'"); };
    WorkflowConfig c;
    auto [ptr, ec] = std::from_chars(id.data(), id.data() + id.size(), c.n_models);
    if (ec != std::errc{} || (c.n_models != 50 && c.n_models != 100 && c.n_models != 200))
        return fail();
    id.remove_prefix(static_cast<std::size_t>(ptr - id.data()));
    if (consume(id, "none"))
        c.pruning = Pruning::none;
    else if (consume(id, "mdsq"))
        c.pruning = Pruning::mdsq;
    else if (consume(id, "bb"))
        c.pruning = Pruning::bb;
    else
        return fail();
    if (c.pruning != Pruning::none) {
        if (consume(id, "0.25"))
            c.cut_percent = 25;
        else if (consume(id, "0.75"))
            c.cut_percent = 75;
        else if (consume(id, "0.5"))
            c.cut_percent = 50;
        else
            return fail();
    }
    if (id == "none")
        c.integration = Integration::vote;
    else if (id == "ola")
        c.integration = Integration::ola;
    else if (id == "knora-e")
        c.integration = Integration::knora_e;
    else
        return fail();
    return c;
}

Eigen::MatrixXd signature_matrix(std::span<const int> pool_labels, const LabelMatrix& predictions)
{
    Eigen::MatrixXd sig(predictions.rows(), predictions.cols());
    for (Eigen::Index m = 0; m < predictions.cols(); ++m)
        for (Eigen::Index i = 0; i < predictions.rows(); ++i)
            sig(i, m) = predictions(i, m) == pool_labels[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
    return sig;
}

std::vector<std::size_t> prune_mdsq(const Eigen::MatrixXd& signatures, std::size_t keep, double p)
{
    const auto models = static_cast<std::size_t>(signatures.cols());
    if (keep < 1 || keep > models)
        throw Error("prune_mdsq: keep out of range");
    std::vector<std::size_t> order;
    std::vector<bool> used(models, false);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(signatures.rows());
    for (std::size_t step = 1; step <= keep; ++step) {
        const double t = static_cast<double>(step);
        std::size_t best = models;
        double best_dist = std::numeric_limits<double>::max();
        for (std::size_t u = 0; u < models; ++u) {
            if (used[u])
                continue;
            // Scaled by t^2, which is the same for every candidate in this step.
            const double dist =
                ((sum + signatures.col(static_cast<Eigen::Index>(u))).array() - p * t).square().sum();
            if (dist < best_dist - 1e-12 * (1.0 + std::abs(best_dist))) {
                best_dist = dist;
                best = u;
            }
        }
        used[best] = true;
        order.push_back(best);
        sum += signatures.col(static_cast<Eigen::Index>(best));
    }
    return order;
}

std::vector<std::size_t> prune_bb(std::span<const int> pool_labels, const LabelMatrix& predictions, std::size_t keep)
{
    const auto models = static_cast<std::size_t>(predictions.cols());
    const auto n = static_cast<std::size_t>(predictions.rows());
    if (keep < 1 || keep > models)
        throw Error("prune_bb: keep out of range");
    std::vector<std::vector<std::uint8_t>> wrong(models, std::vector<std::uint8_t>(n));
    for (std::size_t m = 0; m < models; ++m)
        for (std::size_t i = 0; i < n; ++i)
            wrong[m][i] = predictions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) != pool_labels[i];

    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    std::vector<bool> used(models, false);
    std::vector<std::size_t> order;
    std::vector<double> err(models);

    auto weighted_errors = [&] {
        bool any_below_half = false;
        for (std::size_t m = 0; m < models; ++m) {
            if (used[m])
                continue;
            double e = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (wrong[m][i])
                    e += w[i];
            err[m] = e;
            any_below_half = any_below_half || e < 0.5;
        }
        return any_below_half;
    };

    while (order.size() < keep) {
        if (!weighted_errors()) {
            std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(n));
            weighted_errors();
        }
        std::size_t best = models;
        for (std::size_t m = 0; m < models; ++m)
            if (!used[m] && (best == models || err[m] < err[best]))
                best = m;
        used[best] = true;
        order.push_back(best);

        const double eps = std::clamp(err[best], 1e-6, 1.0 - 1e-6);
        const double alpha = 0.5 * std::log((1.0 - eps) / eps);
        const double up = std::exp(alpha), down = std::exp(-alpha);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            w[i] *= wrong[best][i] ? up : down;
            total += w[i];
        }
        for (double& v : w)
            v /= total;
    }
    return order;
}

std::vector<std::size_t> pruning_order(Pruning method, std::span<const int> pool_labels,
                                       const LabelMatrix& predictions, std::size_t keep, const WorkflowParams& p)
{
    switch (method) {
    case Pruning::mdsq:
        return prune_mdsq(signature_matrix(pool_labels, predictions), keep, p.mdsq_reference);
    case Pruning::bb:
        return prune_bb(pool_labels, predictions, keep);
    case Pruning::none:
        break;
    }
    std::vector<std::size_t> all(static_cast<std::size_t>(predictions.cols()));
    std::iota(all.begin(), all.end(), std::size_t{0});
    all.resize(std::min(keep, all.size()));
    return all;
}

int plurality_vote(std::span<const int> labels, std::size_t n_classes)
{
    std::vector<std::size_t> counts(n_classes, 0);
    for (int l : labels)
        ++counts[static_cast<std::size_t>(l)];
    return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

int integrate_vote(std::span<const std::size_t> models, std::span<const int> query, std::size_t n_classes)
{
    std::vector<std::size_t> counts(n_classes, 0);
    for (auto m : models)
        ++counts[static_cast<std::size_t>(query[m])];
    return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

namespace {

bool correct(const PoolView& pool, std::size_t row, std::size_t model)
{
    return pool.predictions(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(model)) == pool.labels[row];
}

} // namespace

int integrate_ola(const PoolView& pool, std::span<const std::size_t> models, std::span<const std::size_t> neighbors,
                  std::span<const int> query)
{
    std::size_t best = models.front();
    int best_hits = -1;
    for (auto m : models) {
        int hits = 0;
        for (auto nb : neighbors)
            hits += correct(pool, nb, m);
        if (hits > best_hits) {
            best_hits = hits;
            best = m;
        }
    }
    return query[best];
}

std::vector<std::size_t> knorae_select(const PoolView& pool, std::span<const std::size_t> models,
                                       std::span<const std::size_t> neighbors)
{
    for (std::size_t k = neighbors.size(); k >= 1; --k) {
        std::vector<std::size_t> oracles;
        for (auto m : models) {
            bool all = true;
            for (std::size_t j = 0; j < k && all; ++j)
                all = correct(pool, neighbors[j], m);
            if (all)
                oracles.push_back(m);
        }
        if (!oracles.empty())
            return oracles;
    }
    return {models.begin(), models.end()};
}

int integrate_knorae(const PoolView& pool, std::span<const std::size_t> models, std::span<const std::size_t> neighbors,
                     std::span<const int> query)
{
    const auto selected = knorae_select(pool, models, neighbors);
    return integrate_vote(selected, query, pool.n_classes);
}

std::vector<std::size_t> nearest_rows(const Eigen::MatrixXd& pool, const Eigen::Ref<const Eigen::RowVectorXd>& query,
                                      std::size_t k)
{
    const auto n = static_cast<std::size_t>(pool.rows());
    k = std::min(k, n);
    const Eigen::VectorXd dist = (pool.rowwise() - query).rowwise().squaredNorm();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto closer = [&](std::size_t a, std::size_t b) {
        const double da = dist(static_cast<Eigen::Index>(a)), db = dist(static_cast<Eigen::Index>(b));
        return da != db ? da < db : a < b;
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<long>(k), idx.end(), closer);
    idx.resize(k);
    return idx;
}

namespace {

LabelMatrix predict_table(const std::vector<Predictor>& models, const Dataset& d, std::span<const std::size_t> rows)
{
    LabelMatrix t(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(models.size()));
    for (std::size_t m = 0; m < models.size(); ++m)
        for (std::size_t i = 0; i < rows.size(); ++i)
            t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) = models[m].predict(d, rows[i]);
    return t;
}

Predictor grow_bagged_tree(const Dataset& d, std::span<const std::size_t> train_rows, std::uint64_t seed,
                           std::size_t model, const TreeParams& params)
{
    const auto boot = bootstrap_indices(train_rows.size(), derive_seed(seed, model));
    std::vector<std::size_t> rows(boot.size());
    for (std::size_t i = 0; i < boot.size(); ++i)
        rows[i] = train_rows[boot[i]];
    return fit_tree(d, rows, params);
}

std::vector<std::size_t> iota_models(std::size_t n)
{
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

std::vector<int> query_predictions(const FittedWorkflow& w, const Dataset& d, std::size_t row)
{
    std::vector<int> q(w.models.size());
    for (std::size_t m = 0; m < w.models.size(); ++m)
        q[m] = w.models[m].predict(d, row);
    return q;
}

std::vector<std::size_t> query_neighbors(const FittedWorkflow& w, const Dataset& d, std::size_t row, std::size_t k)
{
    const std::size_t one[] = {row};
    const Eigen::MatrixXd q = w.encoder.transform(d, one);
    return nearest_rows(w.pool, q.row(0), k);
}

} // namespace

FittedWorkflow fit_workflow(const WorkflowConfig& c, const Dataset& d, std::span<const std::size_t> train_rows,
                            std::uint64_t seed, const WorkflowParams& params)
{
    if (train_rows.empty())
        throw Error("fit_workflow: no training rows");
    FittedWorkflow w;
    w.config = c;
    w.params = params;
    w.class_labels = d.class_labels;

    std::vector<Predictor> grown;
    grown.reserve(static_cast<std::size_t>(c.n_models));
    for (std::size_t m = 0; m < static_cast<std::size_t>(c.n_models); ++m)
        grown.push_back(grow_bagged_tree(d, train_rows, seed, m, params.tree));

    w.encoder = Encoder(d, train_rows);
    w.pool = w.encoder.transform(d, train_rows);
    for (auto r : train_rows)
        w.pool_labels.push_back(d.target[r]);
    const LabelMatrix table = predict_table(grown, d, train_rows);

    const auto order = pruning_order(c.pruning, w.pool_labels, table, kept_models(c, params), params);
    w.pool_predictions.resize(table.rows(), static_cast<Eigen::Index>(order.size()));
    for (std::size_t j = 0; j < order.size(); ++j) {
        w.models.push_back(std::move(grown[order[j]]));
        w.pool_predictions.col(static_cast<Eigen::Index>(j)) = table.col(static_cast<Eigen::Index>(order[j]));
    }
    return w;
}

int predict_vote(const FittedWorkflow& w, const Dataset& d, std::size_t row)
{
    const auto q = query_predictions(w, d, row);
    return plurality_vote(q, w.n_classes());
}

int predict_ola(const FittedWorkflow& w, const Dataset& d, std::size_t row, std::size_t k)
{
    const auto q = query_predictions(w, d, row);
    const auto nb = query_neighbors(w, d, row, k);
    const auto models = iota_models(w.models.size());
    return integrate_ola({w.pool_predictions, w.pool_labels, w.n_classes()}, models, nb, q);
}

int predict_knorae(const FittedWorkflow& w, const Dataset& d, std::size_t row, std::size_t k)
{
    const auto q = query_predictions(w, d, row);
    const auto nb = query_neighbors(w, d, row, k);
    const auto models = iota_models(w.models.size());
    return integrate_knorae({w.pool_predictions, w.pool_labels, w.n_classes()}, models, nb, q);
}

int predict(const FittedWorkflow& w, const Dataset& d, std::size_t row)
{
    const auto k = static_cast<std::size_t>(w.params.neighbors);
    switch (w.config.integration) {
    case Integration::vote: return predict_vote(w, d, row);
    case Integration::ola: return predict_ola(w, d, row, k);
    case Integration::knora_e: return predict_knorae(w, d, row, k);
    }
    return 0;
}

namespace {

using nlohmann::json;

json node_to_json(const ClassificationTree& t, std::size_t i)
{
    const TreeNode& n = t.nodes()[i];
    if (n.is_leaf())
        return {{"label", n.label}, {"distribution", n.distribution}};
    return {{"feature", n.feature},
            {"threshold", n.threshold},
            {"categorical", n.categorical},
            {"missing_left", n.missing_left},
            {"label", n.label},
            {"left", node_to_json(t, static_cast<std::size_t>(n.left))},
            {"right", node_to_json(t, static_cast<std::size_t>(n.right))}};
}

int node_from_json(const json& j, std::vector<TreeNode>& out)
{
    const auto self = out.size();
    out.emplace_back();
    TreeNode n;
    n.label = j.at("label").get<int>();
    if (j.contains("feature")) {
        n.feature = j.at("feature").get<int>();
        n.threshold = j.at("threshold").get<double>();
        n.categorical = j.at("categorical").get<bool>();
        n.missing_left = j.at("missing_left").get<bool>();
        n.left = node_from_json(j.at("left"), out);
        n.right = node_from_json(j.at("right"), out);
    } else {
        n.distribution = j.at("distribution").get<std::vector<double>>();
    }
    out[self] = std::move(n);
    return static_cast<int>(self);
}

template <typename Matrix>
json matrix_to_json(const Matrix& m)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

template <typename Matrix>
Matrix matrix_from_json(const json& j, Eigen::Index cols)
{
    Matrix m(static_cast<Eigen::Index>(j.size()), cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index c = 0; c < cols; ++c)
            m(i, c) = j.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(c)).template get<typename Matrix::Scalar>();
    return m;
}

} // namespace

std::string workflow_to_json(const FittedWorkflow& w)
{
    json trees = json::array();
    for (const auto& m : w.models) {
        const auto* t = m.tree();
        if (!t)
            throw Error("workflow_to_json: only tree ensembles are serializable");
        trees.push_back(node_to_json(*t, 0));
    }
    json enc = json::array();
    for (const auto& p : w.encoder.provenance())
        enc.push_back({{"source", p.source}, {"category", p.category}});
    json doc = {
        {"format", "autobagging.workflow"},
        {"version", 1},
        {"workflow_id", workflow_id(w.config)},
        {"params",
         {{"neighbors", w.params.neighbors},
          {"mdsq_reference", w.params.mdsq_reference},
          {"cut_removes", w.params.cut_removes},
          {"tree_min_leaf", w.params.tree.min_leaf}}},
        {"class_labels", w.class_labels},
        {"encoder", {{"columns", enc}, {"means", w.encoder.means()}, {"scales", w.encoder.scales()}}},
        {"pool", {{"features", matrix_to_json(w.pool)},
                  {"labels", w.pool_labels},
                  {"predictions", matrix_to_json(w.pool_predictions)}}},
        {"trees", trees},
    };
    return doc.dump(1);
}

FittedWorkflow workflow_from_json(const std::string& text)
{
    const json doc = json::parse(text);
    if (doc.at("format") != "autobagging.workflow")
        throw Error("not a fitted workflow document");
    FittedWorkflow w;
    w.config = parse_workflow_id(doc.at("workflow_id").get<std::string>());
    const auto& p = doc.at("params");
    w.params.neighbors = p.at("neighbors").get<int>();
    w.params.mdsq_reference = p.at("mdsq_reference").get<double>();
    w.params.cut_removes = p.at("cut_removes").get<bool>();
    w.params.tree.min_leaf = p.at("tree_min_leaf").get<std::size_t>();
    w.class_labels = doc.at("class_labels").get<std::vector<std::string>>();

    const auto& enc = doc.at("encoder");
    w.encoder = Encoder::restore(
        [&] {
            std::vector<EncodedColumn> cols;
            for (const auto& c : enc.at("columns"))
                cols.push_back({c.at("source").get<std::size_t>(), c.at("category").get<int>()});
            return cols;
        }(),
        enc.at("means").get<std::vector<double>>(), enc.at("scales").get<std::vector<double>>());

    const auto& pool = doc.at("pool");
    w.pool_labels = pool.at("labels").get<std::vector<int>>();
    w.pool = matrix_from_json<Eigen::MatrixXd>(pool.at("features"), static_cast<Eigen::Index>(w.encoder.width()));
    for (const auto& t : doc.at("trees")) {
        std::vector<TreeNode> nodes;
        node_from_json(t, nodes);
        w.models.emplace_back(ClassificationTree(std::move(nodes), w.class_labels.size()));
    }
    w.pool_predictions =
        matrix_from_json<LabelMatrix>(pool.at("predictions"), static_cast<Eigen::Index>(w.models.size()));
    return w;
}

namespace {

// Per-fold state shared by every workflow config: one bag of trees, its
// predictions on the pool and the held-out rows, and each held-out row's
// nearest pool rows.
struct FoldEnsemble {
    LabelMatrix pool_predictions;
    LabelMatrix test_predictions;
    std::vector<int> pool_labels;
    std::vector<int> test_labels;
    std::vector<std::vector<std::size_t>> neighbors;
};

FoldEnsemble grow_fold_ensemble(const Dataset& d, std::span<const std::size_t> train, std::span<const std::size_t> test,
                                std::uint64_t seed, std::size_t n_models, const WorkflowParams& params)
{
    FoldEnsemble f;
    f.pool_predictions.resize(static_cast<Eigen::Index>(train.size()), static_cast<Eigen::Index>(n_models));
    f.test_predictions.resize(static_cast<Eigen::Index>(test.size()), static_cast<Eigen::Index>(n_models));
    for (std::size_t m = 0; m < n_models; ++m) {
        const Predictor tree = grow_bagged_tree(d, train, seed, m, params.tree);
        for (std::size_t i = 0; i < train.size(); ++i)
            f.pool_predictions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) = tree.predict(d, train[i]);
        for (std::size_t i = 0; i < test.size(); ++i)
            f.test_predictions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) = tree.predict(d, test[i]);
    }
    for (auto r : train)
        f.pool_labels.push_back(d.target[r]);
    for (auto r : test)
        f.test_labels.push_back(d.target[r]);

    const Encoder enc(d, train);
    const Eigen::MatrixXd pool = enc.transform(d, train);
    const Eigen::MatrixXd queries = enc.transform(d, test);
    for (Eigen::Index i = 0; i < queries.rows(); ++i)
        f.neighbors.push_back(nearest_rows(pool, queries.row(i), static_cast<std::size_t>(params.neighbors)));
    return f;
}

std::vector<int> predict_fold(const FoldEnsemble& f, const WorkflowConfig& c, std::span<const std::size_t> models,
                              std::size_t n_classes)
{
    const PoolView pool{f.pool_predictions, f.pool_labels, n_classes};
    std::vector<int> out(f.test_labels.size());
    std::vector<int> query(static_cast<std::size_t>(f.test_predictions.cols()));
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (std::size_t m = 0; m < query.size(); ++m)
            query[m] = f.test_predictions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m));
        switch (c.integration) {
        case Integration::vote: out[i] = integrate_vote(models, query, n_classes); break;
        case Integration::ola: out[i] = integrate_ola(pool, models, f.neighbors[i], query); break;
        case Integration::knora_e: out[i] = integrate_knorae(pool, models, f.neighbors[i], query); break;
        }
    }
    return out;
}

void finish(CvResult& r)
{
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t f = 0; f < r.fold_kappas.size(); ++f)
        if (!r.skipped[f]) {
            sum += r.fold_kappas[f];
            ++used;
        }
    r.flagged = used < r.fold_kappas.size();
    r.mean_kappa = used > 0 ? sum / static_cast<double>(used) : kMissing;
}

bool degenerate(const Dataset& d, std::span<const std::size_t> train)
{
    const auto counts = d.class_counts(train);
    return std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) < 2;
}

} // namespace

CvResult evaluate_workflow_cv(const WorkflowConfig& c, const Dataset& d, const FoldAssignment& folds,
                              std::uint64_t seed, const WorkflowParams& params)
{
    CvResult r;
    for (int f = 0; f < folds.k; ++f) {
        const auto train = folds.train_rows(f);
        const auto test = folds.test_rows(f);
        if (test.empty() || degenerate(d, train)) {
            r.fold_kappas.push_back(kMissing);
            r.skipped.push_back(1);
            continue;
        }
        const auto w = fit_workflow(c, d, train, derive_seed(seed, static_cast<std::uint64_t>(f)), params);
        std::vector<int> truth, pred;
        for (auto row : test) {
            truth.push_back(d.target[row]);
            pred.push_back(predict(w, d, row));
        }
        r.fold_kappas.push_back(cohen_kappa(truth, pred));
        r.skipped.push_back(0);
    }
    finish(r);
    return r;
}

std::vector<double> evaluate_grid_fold(std::span<const WorkflowConfig> configs, const Dataset& d,
                                       const FoldAssignment& folds, int f, std::uint64_t seed,
                                       const WorkflowParams& params)
{
    std::vector<double> kappas(configs.size(), kMissing);
    const auto train = folds.train_rows(f);
    const auto test = folds.test_rows(f);
    if (configs.empty() || test.empty() || degenerate(d, train))
        return kappas;
    int max_models = 0;
    for (const auto& c : configs)
        max_models = std::max(max_models, c.n_models);
    const FoldEnsemble ens = grow_fold_ensemble(d, train, test, derive_seed(seed, static_cast<std::uint64_t>(f)),
                                                static_cast<std::size_t>(max_models), params);

    // Pruning orders are prefix-closed, so one order per (size, method),
    // computed for the largest kept count, serves every cut point.
    std::map<std::pair<int, Pruning>, std::vector<std::size_t>> orders;
    for (const auto& c : configs) {
        auto& order = orders[{c.n_models, c.pruning}];
        order.resize(std::max(order.size(), kept_models(c, params)));
    }
    for (auto& [key, order] : orders) {
        const auto n = static_cast<Eigen::Index>(key.first);
        const LabelMatrix table = ens.pool_predictions.leftCols(n);
        order = pruning_order(key.second, ens.pool_labels, table, order.size(), params);
    }

    for (std::size_t i = 0; i < configs.size(); ++i) {
        const auto& c = configs[i];
        const auto& order = orders.at({c.n_models, c.pruning});
        const std::span<const std::size_t> models(order.data(), kept_models(c, params));
        kappas[i] = cohen_kappa(ens.test_labels, predict_fold(ens, c, models, d.n_classes()));
    }
    return kappas;
}

CvResult cv_result(std::vector<double> fold_kappas)
{
    CvResult r;
    r.fold_kappas = std::move(fold_kappas);
    for (double k : r.fold_kappas)
        r.skipped.push_back(is_missing(k) ? 1 : 0);
    finish(r);
    return r;
}

std::vector<CvResult> evaluate_grid_cv(std::span<const WorkflowConfig> configs, const Dataset& d,
                                       const FoldAssignment& folds, std::uint64_t seed, const WorkflowParams& params)
{
    std::vector<std::vector<double>> per_config(configs.size());
    for (int f = 0; f < folds.k; ++f) {
        const auto kappas = evaluate_grid_fold(configs, d, folds, f, seed, params);
        for (std::size_t i = 0; i < configs.size(); ++i)
            per_config[i].push_back(kappas[i]);
    }
    std::vector<CvResult> results;
    for (auto& k : per_config)
        results.push_back(cv_result(std::move(k)));
    return results;
}

} // namespace autobagging
