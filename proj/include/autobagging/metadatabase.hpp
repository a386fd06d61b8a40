#pragma once

#include "autobagging/metafeatures.hpp"
#include "autobagging/workflows.hpp"

#include <functional>
#include <string>
#include <vector>

namespace autobagging {

struct PerformanceRecord {
    std::string dataset_id;
    std::string workflow_id;
    std::vector<double> fold_kappas;  // NaN for skipped folds
    double mean_kappa = kMissing;     // mean over non-skipped folds
    bool flagged = false;             // skipped folds or a failed dataset
    std::string note;                 // failure reason, empty otherwise
};

struct BuildOptions {
    int folds = 4;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    WorkflowParams params;
};

/// Fold assignment and CV seed used for a dataset; both depend only on the
/// run seed and the dataset id.
FoldAssignment dataset_folds(const Dataset& d, const BuildOptions& o);
std::uint64_t dataset_cv_seed(const std::string& dataset_id, std::uint64_t seed);

/// Evaluates every (dataset, workflow) cell not already in `existing`. Work is
/// split over (dataset, fold) cells; `on_dataset` receives each dataset's
/// fresh records as soon as they are complete (serialized, order unspecified).
/// Returns all records sorted by (dataset_id, workflow_id).
std::vector<PerformanceRecord> build_performance_table(
    const std::vector<Dataset>& datasets, std::span<const WorkflowConfig> workflows, const BuildOptions& o,
    const std::vector<PerformanceRecord>& existing = {},
    const std::function<void(const std::vector<PerformanceRecord>&)>& on_dataset = {});

/// Tie-averaged ranks by descending mean kappa; a missing kappa ranks last.
std::vector<double> compute_ranks(std::span<const PerformanceRecord> records);

/// z = (n + 1) - ceil(rank), at least 1; with 63 items the best gets 63.
std::vector<int> ranks_to_relevance(std::span<const double> ranks, std::size_t n_items = 63);

struct Metatarget {
    std::string dataset_id;
    std::string workflow_id;
    double rank = 0.0;
    int relevance = 0;
};

/// Metatargets for a sorted performance table, one group per dataset.
std::vector<Metatarget> compute_metatargets(const std::vector<PerformanceRecord>& records);

/// Per workflow, its ranks across the given datasets (all when the filter is empty).
RankTable rank_table(const std::vector<Metatarget>& targets, const std::vector<std::string>& datasets = {});

struct MetaExample {
    MetafeatureVector x;
    double rank = 0.0;
    int relevance = 0;
};

struct MetaGroup {
    std::string dataset_id;
    std::vector<MetaExample> examples;  // sorted by workflow id
};

struct MetaDataset {
    std::vector<MetaGroup> groups;  // sorted by dataset id
    std::size_t size() const { return groups.size(); }
};

/// Joins metatargets with metafeature vectors; throws on any unmatched key.
MetaDataset assemble(const std::vector<Metatarget>& targets, const std::vector<MetafeatureVector>& vectors);

std::string performance_to_csv(const std::vector<PerformanceRecord>& records, int folds);
std::vector<PerformanceRecord> performance_from_csv(const std::string& text);
std::string metatargets_to_csv(const std::vector<Metatarget>& targets);
std::vector<Metatarget> metatargets_from_csv(const std::string& text);

/// Sorts records by (dataset_id, workflow_id) and rejects duplicates.
void sort_records(std::vector<PerformanceRecord>& records);

} // namespace autobagging
