#pragma once

#include "autobagging/rank_model.hpp"

#include <map>
#include <string>
#include <vector>

namespace autobagging {

struct EvalConfig {
    RankerConfig ranker;
    int map_k = 10;
    int relevant_top = 10;  // ground-truth positions counted as relevant (ties at the boundary included)
    double alpha = 0.05;
    unsigned workers = 1;
};

struct LodoFold {
    std::string dataset_id;
    std::vector<std::string> predicted;      // metamodel order, best first
    std::vector<std::string> average_rank;   // baseline order from the training datasets
    std::map<std::string, double> truth_rank;
    std::map<std::string, double> kappa;
    std::vector<std::string> training_datasets;  // every dataset that fed the fold's model or rank features
    std::vector<double> scores;                  // aligned with `predicted`
};

/// Leave-one-dataset-out: for each dataset, rank features are recomputed from
/// the other datasets only, a ranker is trained on them and the held-out
/// dataset's workflows are ranked. Folds come back sorted by dataset id.
std::vector<LodoFold> lodo(const std::vector<PerformanceRecord>& records,
                           const std::vector<MetafeatureVector>& vectors, const Registry& registry,
                           const EvalConfig& config);

/// Model trained for one LODO fold (exposed so a fold can be replayed).
GBRanker lodo_fold_model(const std::vector<PerformanceRecord>& records, const std::vector<MetafeatureVector>& vectors,
                         const Registry& registry, const EvalConfig& config, const std::string& held_out);

/// Workflows whose ground-truth tie group starts within the first `top` positions.
std::vector<std::string> relevant_set(const std::map<std::string, double>& truth_rank, int top);

/// AP@k = (1/min(|R|,k)) sum_{i<=k} [item i relevant] precision@i; 0 when R is empty.
double average_precision(const std::vector<std::string>& predicted, const std::vector<std::string>& relevant, int k);

/// Mean AP over folds for the metamodel (`baseline` false) or the average-rank order.
double map_at_k(const std::vector<LodoFold>& folds, int k, int relevant_top, bool baseline);

/// Workflows by ascending mean per-dataset rank, ties by id.
std::vector<std::string> average_rank_baseline(const std::vector<PerformanceRecord>& training);

struct OracleBaseline {
    double oracle = kMissing;
    double bagging100 = kMissing;
};

OracleBaseline oracle_and_bagging100(const std::vector<PerformanceRecord>& records, const std::string& dataset_id);

/// Best mean kappa among the first n workflows of `order`.
double best_at_n(const std::vector<std::string>& order, const std::map<std::string, double>& kappa, std::size_t n);

/// loss(n) averaged over folds: best kappa overall minus best kappa in the top n.
std::vector<double> loss_curve(const std::vector<LodoFold>& folds, bool baseline);

struct CdResult {
    std::vector<std::string> methods;
    std::vector<double> average_ranks;
    std::size_t n_datasets = 0;
    double chi2 = kMissing, chi2_p = kMissing;
    double f_stat = kMissing, f_p = kMissing;
    double q_alpha = kMissing, cd = kMissing;
    bool undefined = false;  // every dataset ties all methods
};

/// Studentized-range based Nemenyi constant for alpha 0.05 or 0.10, k in [2, 10].
double nemenyi_q(std::size_t k, double alpha);

/// Friedman test with Nemenyi critical difference; kappas[dataset][method],
/// higher is better.
CdResult friedman_nemenyi(const std::vector<std::vector<double>>& kappas, const std::vector<std::string>& methods,
                          double alpha);

/// Upper tail of chi-square and F distributions.
double chi2_sf(double x, double df);
double f_sf(double x, double d1, double d2);

struct BenchmarkReport {
    EvalConfig config;
    std::vector<LodoFold> folds;
    std::vector<std::string> methods;              // base-level methods
    std::vector<std::vector<double>> base_kappa;   // [fold][method]
    std::vector<double> loss_autobagging, loss_average_rank;
    std::vector<double> ap_autobagging, ap_average_rank;
    double map_autobagging = kMissing, map_average_rank = kMissing;
    CdResult cd;
    std::vector<Metatarget> targets;  // ground truth over every dataset
};

BenchmarkReport run_benchmark(const std::vector<PerformanceRecord>& records,
                              const std::vector<MetafeatureVector>& vectors, const Registry& registry,
                              const EvalConfig& config);

/// Invariant audit; returns human readable failures (empty when clean).
std::vector<std::string> audit(const BenchmarkReport& report);

/// Writes loss_curve.csv, map_meta.csv, base_level_kappa.csv, cd_diagram.json and rank_boxplot.csv.
void export_results(const BenchmarkReport& report, const std::string& dir);

} // namespace autobagging
