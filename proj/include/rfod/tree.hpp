#pragma once

#include "rfod/table.hpp"

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "json.hpp"

namespace rfod {

enum class TreeMode { Regression, Classification };

/// User-facing tree hyperparameters. Unset fields take the mode-dependent
/// Random Forest defaults when resolved against a predictor count.
struct TreeConfig {
    std::optional<std::size_t> mtry;
    std::optional<std::size_t> max_depth;
    std::optional<std::size_t> min_samples_leaf;
    std::optional<std::size_t> min_samples_split;
    std::size_t max_categorical_partitions = 32;

    friend bool operator==(const TreeConfig&, const TreeConfig&) = default;
};

struct ResolvedTreeConfig {
    std::size_t mtry = 1;
    std::size_t max_depth = std::numeric_limits<std::size_t>::max();
    std::size_t min_samples_leaf = 1;
    std::size_t min_samples_split = 2;
    std::size_t max_categorical_partitions = 32;
};

/// Defaults: mtry = ceil(sqrt(p)) for classification, ceil(p/3) for
/// regression; min_samples_leaf 1 / 5; min_samples_split = 2 * min_samples_leaf.
/// Throws ConfigError when an explicit value breaks 1 <= mtry <= p or
/// min_samples_split >= 2 * min_samples_leaf.
ResolvedTreeConfig resolve(const TreeConfig& config, TreeMode mode, std::size_t n_predictors);

/// Numerical rules send value <= threshold left. Categorical rules list the
/// category ids seen on each side at fit time; anything else follows the
/// child that received more training samples.
struct SplitRule {
    std::size_t feature = 0;
    bool categorical = false;
    double threshold = 0.0;
    std::vector<std::int32_t> left_set;
    std::vector<std::int32_t> right_set;

    friend bool operator==(const SplitRule&, const SplitRule&) = default;
};

struct TreeNode {
    std::optional<SplitRule> rule;  // empty for leaves
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::size_t n_samples = 0;
    double mean = 0.0;                        // regression
    std::vector<std::uint32_t> class_counts;  // classification

    bool is_leaf() const { return !rule.has_value(); }

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// A fitted tree stored as a flat node list; node 0 is the root.
class Tree {
public:
    Tree() = default;
    Tree(TreeMode mode, std::size_t n_classes, std::vector<TreeNode> nodes);

    TreeMode mode() const { return mode_; }
    std::size_t n_classes() const { return n_classes_; }
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    const TreeNode& root() const { return nodes_.front(); }

    /// `row[f]` must yield feature f's value (category id as a double).
    template <typename Row>
    const TreeNode& leaf_for(const Row& row) const {
        const TreeNode* node = &nodes_.front();
        while (node->rule) node = &nodes_[static_cast<std::size_t>(route(*node, row[node->rule->feature]))];
        return *node;
    }

    template <typename Row>
    double predict_value(const Row& row) const {
        return leaf_for(row).mean;
    }

    /// Leaf histogram normalized to sum to one.
    template <typename Row>
    std::vector<double> predict_proba(const Row& row) const {
        return leaf_proba(leaf_for(row));
    }

    std::vector<double> leaf_proba(const TreeNode& leaf) const;

    std::size_t depth() const;
    std::size_t n_leaves() const;
    bool references_feature(std::size_t feature) const;

    friend bool operator==(const Tree&, const Tree&) = default;

private:
    std::int32_t route(const TreeNode& node, double value) const;

    TreeMode mode_ = TreeMode::Regression;
    std::size_t n_classes_ = 0;
    std::vector<TreeNode> nodes_;
};

/// Fit target: real values for regression, class ids in [0, n_classes) for
/// classification.
struct TreeTarget {
    TreeMode mode = TreeMode::Regression;
    std::span<const double> values;
    std::span<const std::int32_t> classes;
    std::size_t n_classes = 0;

    static TreeTarget from_column(const Column& column);
};

/// Row accessor over a table.
struct TableRow {
    const Table* table;
    std::size_t row;
    double operator[](std::size_t feature) const { return table->value(row, feature); }
};

/// Greedy CART fit on the multiset `sample_ids` of rows of `data`, splitting
/// only on the listed predictor columns. Each node draws mtry predictors
/// without replacement from `rng` and keeps the split with the largest
/// impurity decrease (variance or Gini). If none of them can split the node,
/// more predictors are drawn until one can. Ties go to the lowest feature
/// index, then the lowest threshold or lexicographically smallest left set.
Tree fit_tree(const Table& data, std::span<const std::size_t> predictors, const TreeTarget& target,
              std::span<const std::uint32_t> sample_ids, const ResolvedTreeConfig& config, std::mt19937_64& rng);

nlohmann::json tree_to_json(const Tree& tree);
Tree tree_from_json(const nlohmann::json& json);

}  // namespace rfod
