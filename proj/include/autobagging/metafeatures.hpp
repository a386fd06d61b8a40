#pragma once

#include "autobagging/dataset.hpp"
#include "autobagging/mic.hpp"
#include "autobagging/stats.hpp"
#include "autobagging/workflows.hpp"

#include <map>
#include <string>
#include <vector>

namespace autobagging {

enum class MetaBlock { systematic, simple, workflow };

/// One named metafeature: a meta-function applied to an input object, reduced
/// by a post-processor. Single-valued objects use the identity post.
struct MetafeatureSpec {
    std::string name;
    std::string function;  // skewness, pearson, mic, entropy, mutual_information, eta_squared, r_value, rank, ...
    std::string object;
    bool identity = false;
    Post post = Post::avg;
    int bin = 0;  // hist bin, 0-based
    MetaBlock block = MetaBlock::systematic;
};

struct MetafeatureConfig {
    int hist_bins = 10;
    std::size_t r_value_k = 7;
    double r_value_theta = 2.0;
    MicParams mic;
    std::size_t max_mic_columns = 10;    // MIC pairs among the first numeric columns only
    std::size_t max_pair_columns = 30;   // same for Pearson and attribute-pair MI
};

class Registry {
public:
    explicit Registry(const MetafeatureConfig& config = {});

    const std::vector<MetafeatureSpec>& specs() const { return specs_; }
    std::size_t size() const { return specs_.size(); }
    std::size_t count(MetaBlock b) const;
    std::size_t index_of(const std::string& name) const;  // throws Error when unknown
    const std::vector<std::string>& names() const { return names_; }
    const MetafeatureConfig& config() const { return config_; }

    std::string manifest_json() const;
    std::string manifest_hash() const;

private:
    MetafeatureConfig config_;
    std::vector<MetafeatureSpec> specs_;
    std::vector<std::string> names_;
    std::map<std::string, std::size_t> index_;
};

Registry build_registry(const MetafeatureConfig& config = {});

inline const std::vector<std::string>& landmarker_names()
{
    static const std::vector<std::string> names{"naive_bayes.landmarker", "dstump.landmarker_d1",
                                                "dstump.landmarker_d2", "dstump.landmarker_d3",
                                                "majority.landmarker"};
    return names;
}

struct Landmarker {
    std::string name;
    std::vector<int> predictions;  // out-of-fold, aligned with the dataset rows
    double accuracy = 0.0;         // pooled over all folds
};

/// Out-of-fold predictions and accuracies of the five landmarkers.
std::vector<Landmarker> landmarkers(const Dataset& d, const FoldAssignment& folds);

/// Class-overlap values for every ordered class pair (Ci, Cj): the fraction of
/// Ci instances with more than theta of their k nearest neighbours (within
/// Ci and Cj) in Cj. Neighbours tied at the k-th distance count fractionally.
std::vector<double> r_values(const Eigen::MatrixXd& x, std::span<const int> labels, std::size_t n_classes,
                             std::size_t k, double theta);

/// Per workflow id, its ranks across the meta-training datasets.
using RankTable = std::map<std::string, std::vector<double>>;

/// Registry-ordered values of the dataset block; rank and workflow entries are left missing.
struct DatasetProfile {
    std::string dataset_id;
    std::vector<double> values;
};

DatasetProfile profile_dataset(const Dataset& d, const FoldAssignment& folds, const Registry& registry);

struct MetafeatureVector {
    std::string dataset_id;
    std::string workflow_id;
    std::vector<double> values;  // registry order, NaN = missing
};

/// Workflow descriptors: (n_trees, pruning code, cut point, integration code).
std::vector<double> workflow_descriptors(const WorkflowConfig& c);

MetafeatureVector compute_vector(const DatasetProfile& profile, const WorkflowConfig& c, const RankTable& ranks,
                                 const Registry& registry);
MetafeatureVector compute_vector(const Dataset& d, const FoldAssignment& folds, const WorkflowConfig& c,
                                 const RankTable& ranks, const Registry& registry);

/// Rewrites only the rank block of `v` from a different training table.
void refresh_rank_features(MetafeatureVector& v, const RankTable& ranks, const Registry& registry);

std::string metafeatures_to_csv(const std::vector<MetafeatureVector>& rows, const Registry& registry);
std::vector<MetafeatureVector> metafeatures_from_csv(const std::string& text, const Registry& registry);

} // namespace autobagging
