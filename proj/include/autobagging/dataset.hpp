#pragma once

#include "autobagging/common.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace autobagging {

enum class ColumnKind { numeric, categorical };

/// One feature column. Categorical values are stored as codes into a sorted
/// vocabulary; missing entries are tracked in a separate mask.
struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    std::vector<double> values;
    std::vector<std::uint8_t> missing;
    std::vector<std::string> vocabulary;

    std::size_t size() const { return values.size(); }
    bool is_missing(std::size_t row) const { return missing[row] != 0; }
    bool is_numeric() const { return kind == ColumnKind::numeric; }
    std::size_t category_count() const { return vocabulary.size(); }
    std::size_t missing_count() const;

    std::optional<double> at(std::size_t row) const
    {
        if (is_missing(row))
            return std::nullopt;
        return values[row];
    }

    /// Numeric column; NaN entries in `values` become missing.
    static Column numeric(std::string name, std::vector<double> values);
    /// Categorical column from raw tokens; tokens in the missing set become missing.
    static Column categorical(std::string name, const std::vector<std::string>& tokens);
};

/// Missing markers recognized in CSV cells and categorical tokens.
bool is_missing_token(std::string_view token);

struct Dataset {
    std::string id;
    std::vector<Column> features;
    std::string target_name = "class";
    std::vector<int> target;                 // codes into class_labels
    std::vector<std::string> class_labels;   // sorted
    std::size_t dropped_rows = 0;            // rows removed for a missing target

    std::size_t n() const { return target.size(); }
    std::size_t n_features() const { return features.size(); }
    std::size_t n_classes() const { return class_labels.size(); }

    std::vector<std::size_t> class_counts() const;
    std::vector<std::size_t> class_counts(std::span<const std::size_t> rows) const;
    std::vector<std::size_t> all_rows() const;

    /// Content hash of one row (features + target); independent of row position.
    std::uint64_t row_hash(std::size_t row) const;
    /// Order-sensitive hash of the whole table.
    std::uint64_t content_hash() const;

    /// Throws Error when the invariants are violated.
    void validate() const;

    static Dataset from_labels(std::string id, std::vector<Column> features,
                               const std::vector<std::string>& labels);
};

Dataset select_rows(const Dataset& d, std::span<const std::size_t> rows);

using SchemaHints = std::map<std::string, ColumnKind>;

Dataset parse_csv(const std::string& text, const std::string& target_name,
                  const SchemaHints& hints = {}, std::string id = "dataset");
Dataset load_csv(const std::string& path, const std::string& target_name,
                 const SchemaHints& hints = {}, std::string id = "");
std::string to_csv(const Dataset& d);

enum class Eligibility { eligible, too_small, too_large, too_wide };

struct EligibilityLimits {
    std::size_t min_rows = 300;
    std::size_t max_rows = 5000;
    std::size_t max_features = 1000;
};

Eligibility check_eligibility(const Dataset& d, const EligibilityLimits& limits = {});
std::string to_string(Eligibility e);

struct FoldAssignment {
    std::string dataset_id;
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<int> fold_of;   // fold index in [0, k) per instance

    std::vector<std::size_t> test_rows(int fold) const;
    std::vector<std::size_t> train_rows(int fold) const;
};

/// Per-class seeded shuffle followed by round-robin assignment. Rows are put in
/// a content-derived order before shuffling, so permuting the table permutes
/// the assignment along with it.
FoldAssignment stratified_folds(const Dataset& d, int k, std::uint64_t seed);

std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed);

struct EncodedColumn {
    std::size_t source = 0;  // feature index
    int category = -1;       // -1 for a standardized numeric column
};

/// Standardization and one-hot statistics fitted on a subset of rows.
class Encoder {
public:
    Encoder() = default;
    Encoder(const Dataset& d, std::span<const std::size_t> fit_rows);

    /// Rebuilds an encoder from previously fitted statistics.
    static Encoder restore(std::vector<EncodedColumn> provenance, std::vector<double> means,
                           std::vector<double> scales);

    std::size_t width() const { return provenance_.size(); }
    const std::vector<EncodedColumn>& provenance() const { return provenance_; }

    Eigen::MatrixXd transform(const Dataset& d, std::span<const std::size_t> rows) const;
    Eigen::MatrixXd transform(const Dataset& d) const;

    const std::vector<double>& means() const { return mean_; }
    const std::vector<double>& scales() const { return sd_; }

private:
    std::vector<EncodedColumn> provenance_;
    std::vector<double> mean_;  // per feature (numeric only)
    std::vector<double> sd_;
};

struct EncodedView {
    Eigen::MatrixXd matrix;  // one row per instance of the dataset
    std::vector<EncodedColumn> provenance;
};

EncodedView encode(const Dataset& d, std::span<const std::size_t> fit_rows);

} // namespace autobagging
