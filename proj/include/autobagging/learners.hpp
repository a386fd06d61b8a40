#pragma once

#include "autobagging/dataset.hpp"

#include <limits>
#include <span>
#include <variant>
#include <vector>

namespace autobagging {

inline constexpr int kUnlimitedDepth = std::numeric_limits<int>::max();

struct TreeParams {
    int max_depth = kUnlimitedDepth;
    std::size_t min_leaf = 1;
};

/// Node of a classification tree; a leaf when `feature < 0`.
///
/// Numeric splits send `value <= threshold` left, categorical splits send
/// `code == threshold` left. Missing values follow `missing_left`, which
/// records the branch that received more training rows.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    bool categorical = false;
    bool missing_left = true;
    int left = -1;
    int right = -1;
    int label = 0;
    std::vector<double> distribution;  // leaves only; sums to 1

    bool is_leaf() const { return feature < 0; }
};

class ClassificationTree {
public:
    ClassificationTree() = default;
    ClassificationTree(std::vector<TreeNode> nodes, std::size_t n_classes)
        : nodes_(std::move(nodes)), n_classes_(n_classes) {}

    int predict(const Dataset& d, std::size_t row) const;
    const TreeNode& leaf_for(const Dataset& d, std::size_t row) const;

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::size_t n_classes() const { return n_classes_; }
    int depth() const;
    std::size_t leaf_count() const;

private:
    std::vector<TreeNode> nodes_;  // nodes_[0] is the root
    std::size_t n_classes_ = 0;
};

class NaiveBayes {
public:
    NaiveBayes() = default;
    NaiveBayes(const Dataset& d, std::span<const std::size_t> rows);

    int predict(const Dataset& d, std::size_t row) const;

    static constexpr double kVarianceFloor = 1e-9;

private:
    std::vector<double> log_prior_;                        // -inf for absent classes
    std::vector<std::vector<double>> mean_, var_;          // [feature][class], numeric only
    std::vector<std::vector<std::vector<double>>> log_p_;  // [feature][class][category]
};

class MajorityClass {
public:
    MajorityClass() = default;
    explicit MajorityClass(int label) : label_(label) {}
    MajorityClass(const Dataset& d, std::span<const std::size_t> rows);

    int predict(const Dataset&, std::size_t) const { return label_; }
    int label() const { return label_; }

private:
    int label_ = 0;
};

/// A fitted base-level model. Labels are class codes of the training dataset.
class Predictor {
public:
    using Model = std::variant<ClassificationTree, NaiveBayes, MajorityClass>;

    Predictor() = default;
    explicit Predictor(Model m) : model_(std::move(m)) {}

    int predict(const Dataset& d, std::size_t row) const;
    std::vector<int> predict(const Dataset& d, std::span<const std::size_t> rows) const;
    std::vector<int> predict_all(const Dataset& d) const;

    const ClassificationTree* tree() const { return std::get_if<ClassificationTree>(&model_); }
    const Model& model() const { return model_; }

private:
    Model model_;
};

/// CART on Gini impurity. Split ties go to the lowest feature id, then the
/// lowest threshold; leaf ties to the first class in label order.
ClassificationTree grow_tree(const Dataset& d, std::span<const std::size_t> rows,
                             const TreeParams& params);

Predictor fit_tree(const Dataset& d, std::span<const std::size_t> rows, const TreeParams& params);
Predictor fit_stump(const Dataset& d, std::span<const std::size_t> rows, int depth);
Predictor fit_naive_bayes(const Dataset& d, std::span<const std::size_t> rows);
Predictor fit_majority(const Dataset& d, std::span<const std::size_t> rows);

/// Weighted Gini impurity n * (1 - sum p^2) of a class-count vector.
double weighted_gini(std::span<const double> counts);

double accuracy(const Dataset& d, std::span<const std::size_t> rows, std::span<const int> predicted);

} // namespace autobagging
