#pragma once

#include "autobagging/metadatabase.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace autobagging {

struct RankerConfig {
    int rounds = 200;
    int max_depth = 4;
    double eta = 0.1;
    double lambda = 1.0;            // L2 penalty on leaf weights
    double min_child_weight = 1.0;  // minimum hessian sum per child
    double subsample = 1.0;         // fraction of examples per round
    std::uint64_t seed = 0;
};

/// Regression-tree node; a leaf when `feature < 0`. Missing values follow `default_left`.
struct RegNode {
    int feature = -1;
    double threshold = 0.0;  // x < threshold goes left
    bool default_left = true;
    int left = -1, right = -1;
    double weight = 0.0;     // leaf value
    double gain = 0.0;       // split gain at internal nodes
};

struct RegTree {
    std::vector<RegNode> nodes;  // nodes[0] is the root

    double predict(std::span<const double> x) const;
    int depth() const;
};

/// Pairwise logistic loss: sum over pairs with y_i > y_j of log(1 + exp(-(s_i - s_j))).
double pairwise_loss(std::span<const double> scores, std::span<const int> labels);

/// First and second derivatives of pairwise_loss with respect to each score
/// (hessian is the diagonal Gauss-Newton term).
void pairwise_gradients(std::span<const double> scores, std::span<const int> labels, std::span<double> g,
                        std::span<double> h);

struct TreeConfig {
    int max_depth = 4;
    double lambda = 1.0;
    double min_child_weight = 1.0;
};

/// Split gain 1/2 [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)].
double split_gain(double gl, double hl, double gr, double hr, double lambda);

/// Exact greedy second-order tree on rows of x (NaN = missing). Thresholds are
/// midpoints of consecutive distinct values; for each candidate the missing
/// rows are tried on both sides. Ties go to the lower feature, then the lower
/// threshold, then the left default.
RegTree fit_tree_to_gradients(const Eigen::MatrixXd& x, std::span<const double> g, std::span<const double> h,
                              std::span<const std::size_t> rows, const TreeConfig& config);

class GBRanker {
public:
    RankerConfig config;
    double base_score = 0.0;
    std::vector<RegTree> trees;
    std::vector<std::string> feature_names;
    std::string manifest_hash;

    double score(std::span<const double> x) const;
    /// Checks the vector's manifest hash before scoring.
    double score(const MetafeatureVector& v, const std::string& vector_manifest_hash) const;

    std::string to_json() const;
    static GBRanker from_json(const std::string& text);
};

/// Row matrix of a set of metafeature vectors.
Eigen::MatrixXd feature_matrix(const std::vector<const MetafeatureVector*>& rows);

/// Boosting over dataset groups; `loss_trace` (optional) receives the
/// training loss before the first round and after each round.
GBRanker train_ranker(const MetaDataset& data, const RankerConfig& config, const std::vector<std::string>& feature_names,
                      const std::string& manifest_hash, std::vector<double>* loss_trace = nullptr);

struct RankedWorkflow {
    std::string workflow_id;
    double score = 0.0;
};

/// Descending score, ties by workflow id. Throws on duplicate ids.
std::vector<RankedWorkflow> rank_workflows(const GBRanker& model, const std::vector<MetafeatureVector>& vectors,
                                           const std::string& vector_manifest_hash);

/// Total split gain per feature, normalized to sum 1 (all zeros without splits).
std::vector<double> feature_gain(const GBRanker& model);

/// feature,gain rows sorted by descending gain (ties in feature order).
std::string importance_to_csv(const GBRanker& model);

/// Kendall tau-b between two score vectors.
double kendall_tau(std::span<const double> a, std::span<const double> b);

} // namespace autobagging
