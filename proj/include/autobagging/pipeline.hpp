#pragma once

#include "autobagging/evaluation.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace autobagging {

inline constexpr const char* kCodeVersion = "0.1.0";

struct RunConfig {
    std::string manifest;
    std::string out = "autobagging_out";
    std::optional<std::uint64_t> seed;
    int folds = 4;
    unsigned workers = 0;  // 0 = available parallelism
    int map_k = 10;
    int relevant_top = 10;
    double alpha = 0.05;
    int rounds = 200;
    int depth = 4;
    double eta = 0.1;
    double lambda = 1.0;
    double min_child_weight = 1.0;
    double subsample = 1.0;
    std::vector<std::string> workflows;  // empty = the full grid

    std::uint64_t require_seed() const;
    unsigned effective_workers() const;
    RankerConfig ranker() const;
    EvalConfig eval() const;
    std::vector<WorkflowConfig> grid() const;
};

/// Reads a JSON object whose keys mirror the command-line flags (map_k, not map-k).
RunConfig config_from_json(const std::string& text, RunConfig base = {});
std::string config_to_json(const RunConfig& c);

struct StoreEntry {
    std::string id;
    std::string path;  // resolved
    std::string target = "class";
    std::vector<std::string> categorical;  // schema hints
    std::string status;                    // eligible, too_small, too_large, too_wide or error
    std::string reason;
    std::size_t rows = 0, features = 0, classes = 0, dropped_rows = 0;
    std::string content_hash;
};

struct Store {
    std::vector<StoreEntry> entries;  // sorted by id
    std::string hash;

    std::vector<const StoreEntry*> eligible() const;
};

/// Parses a manifest: {"datasets": [{"id", "path", "target", "categorical"?}]} or a bare array.
/// Relative paths resolve against the manifest's directory.
std::vector<StoreEntry> read_manifest(const std::string& path);

Store read_store(const std::string& out_dir);
Dataset load_entry(const StoreEntry& e);

// Subcommands. Each returns a process exit code and logs to `log`.
int cmd_ingest(const RunConfig& c, std::ostream& log);
int cmd_build(const RunConfig& c, std::ostream& log);
int cmd_train(const RunConfig& c, std::ostream& log);
/// Ranks the workflows for a dataset CSV; writes `output` (or OUT/ranking.csv) and echoes it to `log`.
int cmd_rank(const RunConfig& c, const std::string& model_path, const std::string& dataset_path,
             const std::string& target, const std::string& dataset_id, const std::string& output, std::ostream& log);
int cmd_benchmark(const RunConfig& c, std::ostream& log);

/// Ranking rows as written by cmd_rank: position,workflow_id,score.
std::string ranking_to_csv(const std::vector<RankedWorkflow>& ranked);

} // namespace autobagging
