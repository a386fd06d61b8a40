#include "autobagging/metafeatures.hpp"

#include "autobagging/learners.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace autobagging {

using nlohmann::ordered_json;

namespace {

constexpr int kManifestVersion = 1;

std::string post_name(Post p, int bin)
{
    return p == Post::hist ? "hist" + std::to_string(bin + 1) : to_string(p);
}

std::vector<double> column_values(const Column& c)
{
    std::vector<double> v(c.size());
    for (std::size_t i = 0; i < c.size(); ++i)
        v[i] = c.is_missing(i) ? kMissing : c.values[i];
    return v;
}

std::vector<double> as_doubles(std::span<const int> codes)
{
    return {codes.begin(), codes.end()};
}

} // namespace

Registry::Registry(const MetafeatureConfig& config) : config_(config)
{
    if (config.hist_bins < 1)
        throw Error("registry: hist_bins must be positive");
    std::vector<std::pair<Post, int>> posts{{Post::avg, 0}, {Post::max, 0}, {Post::min, 0}, {Post::sd, 0},
                                            {Post::var, 0}};
    for (int b = 0; b < config.hist_bins; ++b)
        posts.push_back({Post::hist, b});

    auto add_set = [&](const std::string& prefix, const std::string& function, const std::string& object) {
        for (auto [p, b] : posts)
            specs_.push_back({prefix + "." + post_name(p, b), function, object, false, p, b, MetaBlock::systematic});
    };
    auto add_one = [&](const std::string& name, const std::string& function, const std::string& object,
                       MetaBlock block) { specs_.push_back({name, function, object, true, Post::avg, 0, block}); };

    add_set("skewness", "skewness", "numeric");
    add_set("pearson", "pearson", "numeric_pairs");
    add_set("mic", "mic", "numeric_pairs");
    add_set("attributes.entropy", "entropy", "discrete");
    add_one("class.entropy", "entropy", "class", MetaBlock::systematic);
    for (const auto& lm : landmarker_names())
        add_one(lm + ".entropy", "entropy", lm, MetaBlock::systematic);
    add_set("attributes.mutual_information", "mutual_information", "discrete_class");
    for (const auto& lm : landmarker_names())
        add_one(lm + ".mutual_information", "mutual_information", lm + "_class", MetaBlock::systematic);
    add_set("attribute_pairs.mutual_information", "mutual_information", "discrete_pairs");
    add_set("eta_squared", "eta_squared", "numeric_class");
    add_set("r_value", "r_value", "class_pairs");
    add_set("rank", "rank", "workflow");

    add_one("n_examples", "count", "examples", MetaBlock::simple);
    add_one("n_attributes", "count", "attributes", MetaBlock::simple);
    add_one("n_classes", "count", "classes", MetaBlock::simple);
    for (const auto& lm : landmarker_names())
        add_one(lm + ".accuracy", "accuracy", lm, MetaBlock::simple);

    for (const char* w : {"n_trees", "pruning", "cut_point", "integration"})
        add_one(std::string("workflow.") + w, "descriptor", w, MetaBlock::workflow);

    for (std::size_t i = 0; i < specs_.size(); ++i) {
        if (!index_.emplace(specs_[i].name, i).second)
            throw Error("registry: duplicate metafeature name " + specs_[i].name);
        names_.push_back(specs_[i].name);
    }
}

std::size_t Registry::count(MetaBlock b) const
{
    return static_cast<std::size_t>(
        std::count_if(specs_.begin(), specs_.end(), [&](const auto& s) { return s.block == b; }));
}

std::size_t Registry::index_of(const std::string& name) const
{
    auto it = index_.find(name);
    if (it == index_.end())
        throw Error("unknown metafeature " + name);
    return it->second;
}

std::string Registry::manifest_json() const
{
    ordered_json j;
    j["version"] = kManifestVersion;
    j["hist_bins"] = config_.hist_bins;
    j["r_value"] = {{"k", config_.r_value_k}, {"theta", config_.r_value_theta}};
    j["mic"] = {{"alpha", config_.mic.alpha},
                {"clumps", config_.mic.clumps},
                {"max_columns", config_.max_mic_columns}};
    j["max_pair_columns"] = config_.max_pair_columns;
    j["codebook"] = {{"pruning", {{"none", 0}, {"mdsq", 1}, {"bb", 2}}},
                     {"integration", {{"none", 0}, {"ola", 1}, {"knora-e", 2}}}};
    ordered_json list = ordered_json::array();
    for (const auto& s : specs_) {
        const char* block = s.block == MetaBlock::systematic ? "systematic"
                            : s.block == MetaBlock::simple   ? "simple"
                                                             : "workflow";
        list.push_back({{"name", s.name},
                        {"function", s.function},
                        {"inputs", s.object},
                        {"post", s.identity ? "identity" : post_name(s.post, s.bin)},
                        {"block", block}});
    }
    j["specs"] = std::move(list);
    return j.dump(2) + "\n";
}

std::string Registry::manifest_hash() const
{
    return hex64(fnv1a(manifest_json()));
}

Registry build_registry(const MetafeatureConfig& config)
{
    return Registry(config);
}

std::vector<Landmarker> landmarkers(const Dataset& d, const FoldAssignment& folds)
{
    std::vector<Landmarker> out;
    for (const auto& name : landmarker_names())
        out.push_back({name, std::vector<int>(d.n(), 0), 0.0});
    for (int f = 0; f < folds.k; ++f) {
        const auto train = folds.train_rows(f);
        const auto test = folds.test_rows(f);
        if (test.empty())
            continue;
        if (train.empty())
            throw Error("landmarkers: empty training fold in " + d.id);
        const std::vector<Predictor> fitted{fit_naive_bayes(d, train), fit_stump(d, train, 1), fit_stump(d, train, 2),
                                            fit_stump(d, train, 3), fit_majority(d, train)};
        for (std::size_t m = 0; m < fitted.size(); ++m) {
            const auto pred = fitted[m].predict(d, test);
            for (std::size_t i = 0; i < test.size(); ++i)
                out[m].predictions[test[i]] = pred[i];
        }
    }
    const auto rows = d.all_rows();
    for (auto& lm : out)
        lm.accuracy = d.n() ? accuracy(d, rows, lm.predictions) : kMissing;
    return out;
}

std::vector<double> r_values(const Eigen::MatrixXd& x, std::span<const int> labels, std::size_t n_classes,
                             std::size_t k, double theta)
{
    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<std::size_t> class_size(n_classes, 0);
    for (int l : labels)
        ++class_size[std::size_t(l)];
    // over[i][j] = number of Ci instances whose neighbourhood within Ci and Cj is dominated by Cj.
    std::vector<std::vector<double>> over(n_classes, std::vector<double>(n_classes, 0.0));
    std::vector<double> dist(n);
    std::vector<double> cand;
    for (std::size_t i = 0; i < n; ++i) {
        dist.assign(n, 0.0);
        for (std::size_t r = 0; r < n; ++r)
            dist[r] = (x.row(static_cast<Eigen::Index>(r)) - x.row(static_cast<Eigen::Index>(i))).squaredNorm();
        const auto ci = std::size_t(labels[i]);
        for (std::size_t cj = 0; cj < n_classes; ++cj) {
            if (cj == ci || class_size[cj] == 0)
                continue;
            cand.clear();
            for (std::size_t r = 0; r < n; ++r)
                if (r != i && (std::size_t(labels[r]) == ci || std::size_t(labels[r]) == cj))
                    cand.push_back(dist[r]);
            const std::size_t keff = std::min(k, cand.size());
            if (keff == 0)
                continue;
            std::nth_element(cand.begin(), cand.begin() + long(keff - 1), cand.end());
            const double dk = cand[keff - 1];
            double n_lt = 0, n_eq = 0, m_lt = 0, m_eq = 0;
            for (std::size_t r = 0; r < n; ++r) {
                if (r == i || (std::size_t(labels[r]) != ci && std::size_t(labels[r]) != cj))
                    continue;
                const bool other = std::size_t(labels[r]) == cj;
                if (dist[r] < dk) {
                    ++n_lt;
                    m_lt += other;
                } else if (dist[r] == dk) {
                    ++n_eq;
                    m_eq += other;
                }
            }
            const double in_other = m_lt + (double(keff) - n_lt) * m_eq / n_eq;
            if (in_other > theta)
                over[ci][cj] += 1;
        }
    }
    std::vector<double> out;
    for (std::size_t a = 0; a < n_classes; ++a)
        for (std::size_t b = 0; b < n_classes; ++b)
            if (a != b && class_size[a] > 0 && class_size[b] > 0)
                out.push_back(over[a][b] / double(class_size[a]));
    return out;
}

std::vector<double> workflow_descriptors(const WorkflowConfig& c)
{
    const double pruning = c.pruning == Pruning::none ? 0 : c.pruning == Pruning::mdsq ? 1 : 2;
    const double integration = c.integration == Integration::vote ? 0 : c.integration == Integration::ola ? 1 : 2;
    return {double(c.n_models), pruning, c.pruning == Pruning::none ? 0.0 : c.cut_point(), integration};
}

DatasetProfile profile_dataset(const Dataset& d, const FoldAssignment& folds, const Registry& registry)
{
    const auto& cfg = registry.config();
    std::vector<std::size_t> numeric, discrete;
    for (std::size_t j = 0; j < d.n_features(); ++j)
        (d.features[j].is_numeric() ? numeric : discrete).push_back(j);
    std::vector<std::vector<double>> cols(d.n_features());
    for (std::size_t j = 0; j < d.n_features(); ++j)
        cols[j] = column_values(d.features[j]);
    const auto target = as_doubles(d.target);

    std::map<std::string, std::vector<double>> sets;  // "function/object" -> multiset
    std::map<std::string, double> singles;
    auto key = [](const std::string& f, const std::string& o) { return f + "/" + o; };

    auto& skew = sets[key("skewness", "numeric")];
    auto& eta = sets[key("eta_squared", "numeric_class")];
    for (auto j : numeric) {
        skew.push_back(skewness<double>(cols[j]));
        eta.push_back(eta_squared(cols[j], target));
    }
    auto& pear = sets[key("pearson", "numeric_pairs")];
    auto& mics = sets[key("mic", "numeric_pairs")];
    for (std::size_t a = 0; a < numeric.size() && a < cfg.max_pair_columns; ++a)
        for (std::size_t b = a + 1; b < numeric.size() && b < cfg.max_pair_columns; ++b) {
            pear.push_back(pearson<double>(cols[numeric[a]], cols[numeric[b]]));
            if (b < cfg.max_mic_columns)
                mics.push_back(mic(cols[numeric[a]], cols[numeric[b]], cfg.mic));
        }

    auto& ent = sets[key("entropy", "discrete")];
    auto& mi_class = sets[key("mutual_information", "discrete_class")];
    auto& mi_pairs = sets[key("mutual_information", "discrete_pairs")];
    for (std::size_t a = 0; a < discrete.size(); ++a) {
        ent.push_back(entropy(cols[discrete[a]]));
        mi_class.push_back(mutual_information(cols[discrete[a]], target));
        for (std::size_t b = a + 1; b < discrete.size() && b < cfg.max_pair_columns && a < cfg.max_pair_columns; ++b)
            mi_pairs.push_back(mutual_information(cols[discrete[a]], cols[discrete[b]]));
    }
    singles[key("entropy", "class")] = entropy(target);

    for (const auto& lm : landmarkers(d, folds)) {
        const auto pred = as_doubles(lm.predictions);
        singles[key("entropy", lm.name)] = entropy(pred);
        singles[key("mutual_information", lm.name + "_class")] = mutual_information(pred, target);
        singles[key("accuracy", lm.name)] = lm.accuracy;
    }

    const auto enc = encode(d, d.all_rows());
    sets[key("r_value", "class_pairs")] = r_values(enc.matrix, d.target, d.n_classes(), cfg.r_value_k, cfg.r_value_theta);

    singles[key("count", "examples")] = double(d.n());
    singles[key("count", "attributes")] = double(d.n_features());
    singles[key("count", "classes")] = double(d.n_classes());

    DatasetProfile p{d.id, std::vector<double>(registry.size(), kMissing)};
    for (std::size_t i = 0; i < registry.size(); ++i) {
        const auto& s = registry.specs()[i];
        if (s.block == MetaBlock::workflow || s.function == "rank")
            continue;
        const auto k = key(s.function, s.object);
        if (s.identity) {
            if (auto it = singles.find(k); it != singles.end())
                p.values[i] = it->second;
        } else if (auto it = sets.find(k); it != sets.end()) {
            p.values[i] = postprocess(it->second, s.post, s.bin, cfg.hist_bins);
        }
    }
    return p;
}

void refresh_rank_features(MetafeatureVector& v, const RankTable& ranks, const Registry& registry)
{
    const auto it = ranks.find(v.workflow_id);
    for (std::size_t i = 0; i < registry.size(); ++i) {
        const auto& s = registry.specs()[i];
        if (s.function != "rank")
            continue;
        v.values[i] = it == ranks.end() ? kMissing : postprocess(it->second, s.post, s.bin, registry.config().hist_bins);
    }
}

MetafeatureVector compute_vector(const DatasetProfile& profile, const WorkflowConfig& c, const RankTable& ranks,
                                 const Registry& registry)
{
    if (profile.values.size() != registry.size())
        throw Error("compute_vector: profile does not match the registry");
    MetafeatureVector v{profile.dataset_id, workflow_id(c), profile.values};
    refresh_rank_features(v, ranks, registry);
    const auto desc = workflow_descriptors(c);
    const char* names[] = {"workflow.n_trees", "workflow.pruning", "workflow.cut_point", "workflow.integration"};
    for (std::size_t i = 0; i < 4; ++i)
        v.values[registry.index_of(names[i])] = desc[i];
    return v;
}

MetafeatureVector compute_vector(const Dataset& d, const FoldAssignment& folds, const WorkflowConfig& c,
                                 const RankTable& ranks, const Registry& registry)
{
    return compute_vector(profile_dataset(d, folds, registry), c, ranks, registry);
}

std::string metafeatures_to_csv(const std::vector<MetafeatureVector>& rows, const Registry& registry)
{
    std::ostringstream out;
    out << "dataset_id,workflow_id";
    for (const auto& n : registry.names())
        out << ',' << n;
    out << '\n';
    for (const auto& r : rows) {
        if (r.values.size() != registry.size())
            throw Error("metafeatures_to_csv: vector length mismatch for " + r.dataset_id);
        out << csv_escape(r.dataset_id) << ',' << r.workflow_id;
        for (double v : r.values)
            out << ',' << format_double(v);
        out << '\n';
    }
    return out.str();
}

std::vector<MetafeatureVector> metafeatures_from_csv(const std::string& text, const Registry& registry)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw Error("metafeatures csv: empty");
    const auto header = split_csv_line(line);
    if (header.size() != registry.size() + 2 || header[0] != "dataset_id" || header[1] != "workflow_id")
        throw Error("metafeatures csv: header does not match the registry");
    for (std::size_t i = 0; i < registry.size(); ++i)
        if (header[i + 2] != registry.names()[i])
            throw Error("metafeatures csv: column " + header[i + 2] + " does not match the registry");
    std::vector<MetafeatureVector> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        const auto f = split_csv_line(line);
        if (f.size() != header.size())
            throw Error("metafeatures csv: wrong field count on line " + std::to_string(line_no));
        MetafeatureVector v{f[0], f[1], std::vector<double>(registry.size(), kMissing)};
        for (std::size_t i = 0; i < registry.size(); ++i) {
            const auto& cell = f[i + 2];
            if (cell.empty())
                continue;
            if (!parse_double(cell, v.values[i]))
                throw Error("metafeatures csv: bad value '" + cell + "' on line " + std::to_string(line_no));
        }
        rows.push_back(std::move(v));
    }
    return rows;
}

} // namespace autobagging
