#pragma once

#include "autobagging/dataset.hpp"
#include "autobagging/learners.hpp"

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace autobagging {

enum class Pruning { none, mdsq, bb };
enum class Integration { vote, ola, knora_e };

/// Instance x model table of predicted class codes.
using LabelMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

struct WorkflowConfig {
    int n_models = 100;
    Pruning pruning = Pruning::none;
    int cut_percent = 0;  // 25, 50 or 75 when pruned, else 0
    Integration integration = Integration::vote;

    double cut_point() const { return cut_percent / 100.0; }
    bool operator==(const WorkflowConfig&) const = default;
};

struct WorkflowParams {
    int neighbors = 7;
    double mdsq_reference = 0.075;
    bool cut_removes = true;  // cut point is the fraction of models removed
    TreeParams tree{kUnlimitedDepth, 2};
};

/// Number of models kept after pruning.
std::size_t kept_models(const WorkflowConfig& c, const WorkflowParams& p = {});

/// The 63-workflow grid, sorted by canonical id.
std::vector<WorkflowConfig> enumerate_workflows();

/// Canonical id, e.g. "200bb0.75knora-e" or "100nonenone".
std::string workflow_id(const WorkflowConfig& c);
WorkflowConfig parse_workflow_id(std::string_view id);

std::string to_string(Pruning p);
std::string to_string(Integration i);

/// +1 where the model is correct on a pool instance, -1 otherwise.
Eigen::MatrixXd signature_matrix(std::span<const int> pool_labels, const LabelMatrix& predictions);

/// Margin distance minimization: greedy ordering that keeps the mean signature
/// vector of the selected models closest to (p, ..., p).
std::vector<std::size_t> prune_mdsq(const Eigen::MatrixXd& signatures, std::size_t keep, double p);

/// Boosting-based ordering over fixed models (no retraining).
std::vector<std::size_t> prune_bb(std::span<const int> pool_labels, const LabelMatrix& predictions,
                                  std::size_t keep);

/// Full pruning order for a method; any kept count is a prefix of it.
std::vector<std::size_t> pruning_order(Pruning method, std::span<const int> pool_labels,
                                       const LabelMatrix& predictions, std::size_t keep,
                                       const WorkflowParams& p = {});

// Integration kernels. `models` selects columns of the prediction tables;
// `query` holds every model's prediction for the instance being classified.

int plurality_vote(std::span<const int> labels, std::size_t n_classes);

struct PoolView {
    const LabelMatrix& predictions;   // pool x models
    std::span<const int> labels;
    std::size_t n_classes;
};

int integrate_vote(std::span<const std::size_t> models, std::span<const int> query, std::size_t n_classes);
int integrate_ola(const PoolView& pool, std::span<const std::size_t> models,
                  std::span<const std::size_t> neighbors, std::span<const int> query);
std::vector<std::size_t> knorae_select(const PoolView& pool, std::span<const std::size_t> models,
                                       std::span<const std::size_t> neighbors);
int integrate_knorae(const PoolView& pool, std::span<const std::size_t> models,
                     std::span<const std::size_t> neighbors, std::span<const int> query);

/// The k nearest pool rows by Euclidean distance, closest first; ties go to the lower index.
std::vector<std::size_t> nearest_rows(const Eigen::MatrixXd& pool, const Eigen::Ref<const Eigen::RowVectorXd>& query,
                                      std::size_t k);

struct FittedWorkflow {
    WorkflowConfig config;
    WorkflowParams params;
    std::vector<Predictor> models;   // post-pruning, in selection order
    Encoder encoder;
    Eigen::MatrixXd pool;            // encoded selection pool
    std::vector<int> pool_labels;
    LabelMatrix pool_predictions;    // |pool| x |models|
    std::vector<std::string> class_labels;

    std::size_t n_classes() const { return class_labels.size(); }
};

/// Grows `n_models` trees on bootstraps of `train_rows`; tree m uses seed derive_seed(seed, m).
FittedWorkflow fit_workflow(const WorkflowConfig& c, const Dataset& d, std::span<const std::size_t> train_rows,
                            std::uint64_t seed, const WorkflowParams& params = {});

int predict_vote(const FittedWorkflow& w, const Dataset& d, std::size_t row);
int predict_ola(const FittedWorkflow& w, const Dataset& d, std::size_t row, std::size_t k);
int predict_knorae(const FittedWorkflow& w, const Dataset& d, std::size_t row, std::size_t k);
/// Dispatches on the configured integration with the configured neighborhood size.
int predict(const FittedWorkflow& w, const Dataset& d, std::size_t row);

std::string workflow_to_json(const FittedWorkflow& w);
FittedWorkflow workflow_from_json(const std::string& text);

struct CvResult {
    std::vector<double> fold_kappas;   // NaN for skipped folds
    std::vector<std::uint8_t> skipped;
    double mean_kappa = 0.0;
    bool flagged = false;              // at least one fold skipped
};

/// Fits and scores one workflow per fold; fold f uses seed derive_seed(seed, f).
CvResult evaluate_workflow_cv(const WorkflowConfig& c, const Dataset& d, const FoldAssignment& folds,
                              std::uint64_t seed, const WorkflowParams& params = {});

/// Kappas of every config on fold f (NaN when the fold is skipped), from one
/// shared bag of max(n_models) trees.
std::vector<double> evaluate_grid_fold(std::span<const WorkflowConfig> configs, const Dataset& d,
                                       const FoldAssignment& folds, int f, std::uint64_t seed,
                                       const WorkflowParams& params = {});

/// Builds a CvResult from per-fold kappas; NaN marks a skipped fold.
CvResult cv_result(std::vector<double> fold_kappas);

/// Same results as calling evaluate_workflow_cv for every config, but each fold
/// grows a single bag of max(n_models) trees shared by all configs.
std::vector<CvResult> evaluate_grid_cv(std::span<const WorkflowConfig> configs, const Dataset& d,
                                       const FoldAssignment& folds, std::uint64_t seed,
                                       const WorkflowParams& params = {});

} // namespace autobagging
