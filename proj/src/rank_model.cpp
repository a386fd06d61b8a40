#include "autobagging/rank_model.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace autobagging {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kModelVersion = 1;

double log1pexp(double x)
{
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

struct Split {
    int feature = -1;
    double threshold = 0.0;
    bool default_left = true;
    double gain = 0.0;
};

class Builder {
public:
    Builder(const Eigen::MatrixXd& x, std::span<const double> g, std::span<const double> h, const TreeConfig& c)
        : x_(x), g_(g), h_(h), c_(c)
    {
    }

    RegTree build(std::vector<std::size_t> rows)
    {
        tree_.nodes.clear();
        grow(std::move(rows), 0);
        return std::move(tree_);
    }

private:
    int grow(std::vector<std::size_t> rows, int depth)
    {
        double G = 0, H = 0;
        for (auto r : rows) {
            G += g_[r];
            H += h_[r];
        }
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.push_back({});
        tree_.nodes[std::size_t(id)].weight = -G / (H + c_.lambda);
        if (depth >= c_.max_depth || rows.size() < 2)
            return id;
        const Split s = best_split(rows, G, H);
        if (s.feature < 0)
            return id;
        std::vector<std::size_t> left, right;
        for (auto r : rows) {
            const double v = x_(static_cast<Eigen::Index>(r), s.feature);
            const bool go_left = is_missing(v) ? s.default_left : v < s.threshold;
            (go_left ? left : right).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();
        const int l = grow(std::move(left), depth + 1);
        const int r = grow(std::move(right), depth + 1);
        auto& node = tree_.nodes[std::size_t(id)];
        node.feature = s.feature;
        node.threshold = s.threshold;
        node.default_left = s.default_left;
        node.gain = s.gain;
        node.left = l;
        node.right = r;
        return id;
    }

    Split best_split(const std::vector<std::size_t>& rows, double G, double H) const
    {
        Split best;
        std::vector<std::pair<double, std::size_t>> vals;
        for (Eigen::Index f = 0; f < x_.cols(); ++f) {
            vals.clear();
            double gm = 0, hm = 0;
            for (auto r : rows) {
                const double v = x_(static_cast<Eigen::Index>(r), f);
                if (is_missing(v)) {
                    gm += g_[r];
                    hm += h_[r];
                } else {
                    vals.push_back({v, r});
                }
            }
            if (vals.size() < 2)
                continue;
            std::sort(vals.begin(), vals.end());
            double gl = 0, hl = 0;
            for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                gl += g_[vals[i].second];
                hl += h_[vals[i].second];
                const double a = vals[i].first, b = vals[i + 1].first;
                if (a == b)
                    continue;
                double thr = a + (b - a) / 2;
                if (!(thr > a))
                    thr = b;
                for (bool left : {true, false}) {
                    const double GL = gl + (left ? gm : 0.0), HL = hl + (left ? hm : 0.0);
                    const double GR = G - GL, HR = H - HL;
                    if (HL < c_.min_child_weight || HR < c_.min_child_weight)
                        continue;
                    const double gain = split_gain(GL, HL, GR, HR, c_.lambda);
                    if (gain > best.gain + 1e-12 * (1.0 + std::abs(best.gain)))
                        best = {static_cast<int>(f), thr, left, gain};
                }
            }
        }
        return best;
    }

    const Eigen::MatrixXd& x_;
    std::span<const double> g_, h_;
    TreeConfig c_;
    RegTree tree_;
};

ordered_json tree_to_json(const RegTree& t)
{
    ordered_json nodes = ordered_json::array();
    for (const auto& n : t.nodes) {
        if (n.feature < 0)
            nodes.push_back({{"leaf", n.weight}});
        else
            nodes.push_back({{"feature", n.feature},
                             {"threshold", n.threshold},
                             {"default", n.default_left ? "left" : "right"},
                             {"left", n.left},
                             {"right", n.right},
                             {"gain", n.gain},
                             {"weight", n.weight}});
    }
    return nodes;
}

RegTree tree_from_json(const json& j, std::size_t n_features)
{
    RegTree t;
    for (const auto& n : j) {
        RegNode node;
        if (n.contains("leaf")) {
            node.weight = n.at("leaf").get<double>();
        } else {
            node.feature = n.at("feature").get<int>();
            node.threshold = n.at("threshold").get<double>();
            node.default_left = n.at("default").get<std::string>() == "left";
            node.left = n.at("left").get<int>();
            node.right = n.at("right").get<int>();
            node.gain = n.at("gain").get<double>();
            node.weight = n.at("weight").get<double>();
        }
        t.nodes.push_back(node);
    }
    const int size = static_cast<int>(t.nodes.size());
    for (const auto& n : t.nodes)
        if (n.feature >= 0 &&
            (n.feature >= int(n_features) || n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size))
            throw Error("model: malformed tree");
    if (t.nodes.empty())
        throw Error("model: empty tree");
    return t;
}

} // namespace

double RegTree::predict(std::span<const double> x) const
{
    std::size_t i = 0;
    while (nodes[i].feature >= 0) {
        const auto& n = nodes[i];
        const double v = x[std::size_t(n.feature)];
        const bool left = is_missing(v) ? n.default_left : v < n.threshold;
        i = std::size_t(left ? n.left : n.right);
    }
    return nodes[i].weight;
}

int RegTree::depth() const
{
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        best = std::max(best, d[i]);
        if (nodes[i].feature >= 0) {
            d[std::size_t(nodes[i].left)] = d[i] + 1;
            d[std::size_t(nodes[i].right)] = d[i] + 1;
        }
    }
    return best;
}

double pairwise_loss(std::span<const double> scores, std::span<const int> labels)
{
    double loss = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        for (std::size_t j = 0; j < scores.size(); ++j)
            if (labels[i] > labels[j])
                loss += log1pexp(-(scores[i] - scores[j]));
    return loss;
}

void pairwise_gradients(std::span<const double> scores, std::span<const int> labels, std::span<double> g,
                        std::span<double> h)
{
    std::fill(g.begin(), g.end(), 0.0);
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t i = 0; i < scores.size(); ++i)
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[i] <= labels[j])
                continue;
            const double s = scores[i] - scores[j];
            const double sig = 1.0 / (1.0 + std::exp(-s));  // e^s / (1 + e^s)
            const double lambda = -(1.0 - sig);               // -1 / (1 + e^s)
            const double rho = sig * (1.0 - sig);
            g[i] += lambda;
            g[j] -= lambda;
            h[i] += rho;
            h[j] += rho;
        }
}

double split_gain(double gl, double hl, double gr, double hr, double lambda)
{
    const double g = gl + gr, h = hl + hr;
    return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda));
}

RegTree fit_tree_to_gradients(const Eigen::MatrixXd& x, std::span<const double> g, std::span<const double> h,
                              std::span<const std::size_t> rows, const TreeConfig& config)
{
    if (rows.empty())
        throw Error("fit_tree_to_gradients: no rows");
    return Builder(x, g, h, config).build({rows.begin(), rows.end()});
}

double GBRanker::score(std::span<const double> x) const
{
    if (x.size() != feature_names.size())
        throw Error("score: expected " + std::to_string(feature_names.size()) + " features, got " +
                    std::to_string(x.size()));
    double s = 0;
    for (const auto& t : trees)
        s += t.predict(x);
    return base_score + config.eta * s;
}

double GBRanker::score(const MetafeatureVector& v, const std::string& vector_manifest_hash) const
{
    if (vector_manifest_hash != manifest_hash)
        throw Error("score: metafeature manifest " + vector_manifest_hash + " does not match model manifest " +
                    manifest_hash);
    return score(v.values);
}

std::string GBRanker::to_json() const
{
    ordered_json j;
    j["format"] = "autobagging-gbranker";
    j["version"] = kModelVersion;
    j["config"] = {{"rounds", config.rounds},
                   {"max_depth", config.max_depth},
                   {"eta", config.eta},
                   {"lambda", config.lambda},
                   {"min_child_weight", config.min_child_weight},
                   {"subsample", config.subsample},
                   {"seed", config.seed}};
    j["base_score"] = base_score;
    j["manifest_hash"] = manifest_hash;
    j["features"] = feature_names;
    ordered_json ts = ordered_json::array();
    for (const auto& t : trees)
        ts.push_back(tree_to_json(t));
    j["trees"] = std::move(ts);
    return j.dump(1) + "\n";
}

GBRanker GBRanker::from_json(const std::string& text)
{
    try {
        const json j = json::parse(text);
        if (j.at("format") != "autobagging-gbranker" || j.at("version") != kModelVersion)
            throw Error("model: unsupported format");
        GBRanker m;
        const auto& c = j.at("config");
        m.config.rounds = c.at("rounds").get<int>();
        m.config.max_depth = c.at("max_depth").get<int>();
        m.config.eta = c.at("eta").get<double>();
        m.config.lambda = c.at("lambda").get<double>();
        m.config.min_child_weight = c.at("min_child_weight").get<double>();
        m.config.subsample = c.at("subsample").get<double>();
        m.config.seed = c.at("seed").get<std::uint64_t>();
        m.base_score = j.at("base_score").get<double>();
        m.manifest_hash = j.at("manifest_hash").get<std::string>();
        m.feature_names = j.at("features").get<std::vector<std::string>>();
        for (const auto& t : j.at("trees"))
            m.trees.push_back(tree_from_json(t, m.feature_names.size()));
        return m;
    } catch (const json::exception& e) {
        throw Error(std::string("model: ") + e.what());
    }
}

Eigen::MatrixXd feature_matrix(const std::vector<const MetafeatureVector*>& rows)
{
    if (rows.empty())
        return {};
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0]->values.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i]->values.size() != rows[0]->values.size())
            throw Error("feature_matrix: ragged rows");
        for (std::size_t j = 0; j < rows[i]->values.size(); ++j)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i]->values[j];
    }
    return x;
}

GBRanker train_ranker(const MetaDataset& data, const RankerConfig& config, const std::vector<std::string>& feature_names,
                      const std::string& manifest_hash, std::vector<double>* loss_trace)
{
    if (data.groups.size() < 2)
        throw Error("train_ranker: need at least two dataset groups");
    if (config.rounds < 0 || config.max_depth < 0 || !(config.eta > 0) || !(config.subsample > 0) ||
        config.subsample > 1)
        throw Error("train_ranker: invalid configuration");
    std::vector<const MetafeatureVector*> rows;
    std::vector<int> labels;
    std::vector<std::size_t> offsets{0};
    for (const auto& grp : data.groups) {
        if (grp.examples.empty())
            throw Error("train_ranker: empty group " + grp.dataset_id);
        for (const auto& e : grp.examples) {
            if (e.x.values.size() != feature_names.size())
                throw Error("train_ranker: vector length does not match the feature names");
            rows.push_back(&e.x);
            labels.push_back(e.relevance);
        }
        offsets.push_back(rows.size());
    }
    const Eigen::MatrixXd x = feature_matrix(rows);
    const std::size_t n = rows.size();

    GBRanker m;
    m.config = config;
    m.feature_names = feature_names;
    m.manifest_hash = manifest_hash;
    std::vector<double> scores(n, m.base_score), g(n), h(n);

    auto total_loss = [&] {
        double loss = 0;
        for (std::size_t k = 0; k + 1 < offsets.size(); ++k) {
            const std::size_t a = offsets[k], b = offsets[k + 1];
            loss += pairwise_loss(std::span(scores).subspan(a, b - a), std::span(labels).subspan(a, b - a));
        }
        return loss;
    };
    if (loss_trace)
        loss_trace->assign(1, total_loss());

    const TreeConfig tc{config.max_depth, config.lambda, config.min_child_weight};
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (int round = 0; round < config.rounds; ++round) {
        for (std::size_t k = 0; k + 1 < offsets.size(); ++k) {
            const std::size_t a = offsets[k], b = offsets[k + 1];
            pairwise_gradients(std::span(scores).subspan(a, b - a), std::span(labels).subspan(a, b - a),
                               std::span(g).subspan(a, b - a), std::span(h).subspan(a, b - a));
        }
        std::vector<std::size_t> sample = all;
        if (config.subsample < 1.0) {
            Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(round)));
            rng.shuffle(sample);
            sample.resize(std::max<std::size_t>(1, std::size_t(std::ceil(config.subsample * double(n)))));
            std::sort(sample.begin(), sample.end());
        }
        m.trees.push_back(fit_tree_to_gradients(x, g, h, sample, tc));
        for (std::size_t i = 0; i < n; ++i)
            scores[i] += config.eta * m.trees.back().predict(rows[i]->values);
        if (loss_trace)
            loss_trace->push_back(total_loss());
    }
    return m;
}

std::vector<RankedWorkflow> rank_workflows(const GBRanker& model, const std::vector<MetafeatureVector>& vectors,
                                           const std::string& vector_manifest_hash)
{
    std::set<std::string> ids;
    std::vector<RankedWorkflow> out;
    for (const auto& v : vectors) {
        if (!ids.insert(v.workflow_id).second)
            throw Error("rank_workflows: duplicate workflow id " + v.workflow_id);
        out.push_back({v.workflow_id, model.score(v, vector_manifest_hash)});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.score != b.score ? a.score > b.score : a.workflow_id < b.workflow_id;
    });
    return out;
}

std::vector<double> feature_gain(const GBRanker& model)
{
    std::vector<double> gain(model.feature_names.size(), 0.0);
    for (const auto& t : model.trees)
        for (const auto& n : t.nodes)
            if (n.feature >= 0)
                gain[std::size_t(n.feature)] += n.gain;
    const double total = std::accumulate(gain.begin(), gain.end(), 0.0);
    if (total > 0)
        for (double& v : gain)
            v /= total;
    return gain;
}

std::string importance_to_csv(const GBRanker& model)
{
    const auto gain = feature_gain(model);
    std::vector<std::size_t> order(gain.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return gain[a] > gain[b]; });
    std::ostringstream out;
    out << "feature,gain\n";
    for (auto i : order)
        out << csv_escape(model.feature_names[i]) << ',' << format_double(gain[i]) << '\n';
    return out.str();
}

double kendall_tau(std::span<const double> a, std::span<const double> b)
{
    double concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const double da = a[i] - a[j], db = b[i] - b[j];
            if (da == 0 && db == 0)
                continue;
            if (da == 0)
                ++ties_a;
            else if (db == 0)
                ++ties_b;
            else if ((da > 0) == (db > 0))
                ++concordant;
            else
                ++discordant;
        }
    const double denom = std::sqrt((concordant + discordant + ties_a) * (concordant + discordant + ties_b));
    return denom > 0 ? (concordant - discordant) / denom : kMissing;
}

} // namespace autobagging
