#pragma once

#include "rfod/tree.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace rfod {

struct ForestConfig {
    std::size_t t = 100;
    TreeConfig tree;
    double bootstrap_fraction = 1.0;  // draws per tree, as a fraction of n, with replacement

    friend bool operator==(const ForestConfig&, const ForestConfig&) = default;
};

struct TreeRecord {
    Tree tree;
    std::vector<std::uint32_t> bootstrap;  // multiset of drawn rows, sorted; empty after loading from disk
    std::vector<std::uint32_t> oob;        // rows never drawn, sorted
    double phi = 0.0;                      // OOB quality; -inf when the OOB set is empty

    friend bool operator==(const TreeRecord&, const TreeRecord&) = default;
};

/// Per-active-tree outputs for one row: `values` in regression mode,
/// `probas` (one class vector per tree) in classification mode.
struct TreePredictions {
    std::vector<double> values;
    std::vector<std::vector<double>> probas;

    std::size_t size() const { return values.empty() ? probas.size() : values.size(); }
};

struct Aggregate {
    double point = 0.0;          // mean, or argmax class id
    std::vector<double> proba;   // classification only
    double uncertainty = 0.0;
};

/// Bootstrap ensemble with OOB bookkeeping. Every fitted tree is retained;
/// pruning only changes which trees are active.
class Forest {
public:
    Forest() = default;
    Forest(TreeMode mode, std::vector<std::string> classes, std::vector<TreeRecord> trees);

    TreeMode mode() const { return mode_; }
    const std::vector<std::string>& classes() const { return classes_; }
    const std::vector<TreeRecord>& trees() const { return trees_; }
    std::size_t t_total() const { return trees_.size(); }
    const std::vector<std::size_t>& active() const { return active_; }
    double beta() const { return beta_; }

    /// All tree indices by descending phi, ties by ascending index; -inf last.
    std::vector<std::size_t> ranking() const;

    /// Keeps the top max(1, floor(beta * t_total)) trees of the ranking;
    /// active() lists them by ascending tree index.
    /// Throws ConfigError for beta outside (0, 1].
    void apply_pruning(double beta);

    template <typename Row>
    TreePredictions predict_per_tree(const Row& row) const {
        TreePredictions out;
        if (mode_ == TreeMode::Regression) {
            out.values.reserve(active_.size());
            for (auto i : active_) out.values.push_back(trees_[i].tree.predict_value(row));
        } else {
            out.probas.reserve(active_.size());
            for (auto i : active_) out.probas.push_back(trees_[i].tree.predict_proba(row));
        }
        return out;
    }

    template <typename Row>
    Aggregate predict(const Row& row) const;

    bool references_feature(std::size_t feature) const;

    friend bool operator==(const Forest&, const Forest&) = default;

private:
    TreeMode mode_ = TreeMode::Regression;
    std::vector<std::string> classes_;
    std::vector<TreeRecord> trees_;
    std::vector<std::size_t> active_;
    double beta_ = 1.0;
};

/// Regression: mean and population standard deviation. Classification: mean
/// probability vector, argmax (lowest id on ties), and sqrt(p(1-p)) where p is
/// the share of trees whose own argmax matches the ensemble's.
Aggregate aggregate(const TreePredictions& per_tree, TreeMode mode);

template <typename Row>
Aggregate Forest::predict(const Row& row) const {
    return aggregate(predict_per_tree(row), mode_);
}

/// Draws the bootstrap and fits one tree on it. With `score_oob` the tree is
/// also scored on its OOB rows; otherwise phi is left at 0.
TreeRecord grow_tree(const Table& data, std::span<const std::size_t> predictors, const TreeTarget& target,
                     const ResolvedTreeConfig& config, double bootstrap_fraction, std::uint64_t tree_seed,
                     bool score_oob = true);

/// Assembles fitted trees (in tree-index order) into a forest predicting column `target`.
Forest assemble_forest(const Table& data, std::size_t target, std::vector<TreeRecord> trees);

/// Number of trees kept at retaining ratio beta: max(1, floor(beta * t)).
std::size_t retained_count(std::size_t t, double beta);

/// Fits t trees for `target` using only the `predictors` columns. Tree i uses
/// its own generator seeded from (seed, i), so the result is the same for any
/// `threads`. All trees start active, ranked by phi.
Forest fit_forest(const Table& data, std::span<const std::size_t> predictors, std::size_t target,
                  const ForestConfig& config, std::uint64_t seed, std::size_t threads = 1);

/// OOB quality of a tree: R^2 for regression, macro one-vs-rest AUC-ROC of the
/// leaf probabilities for classification. Degenerate cases: empty OOB gives
/// -inf; constant OOB target gives 1 if predicted exactly else 0; fewer than
/// two OOB classes gives 0.5.
double oob_score(const Tree& tree, std::span<const std::uint32_t> oob, const Table& data, const TreeTarget& target);
double oob_score(const Forest& forest, std::size_t tree_index, const Table& data, std::size_t target);

/// Copy of the forest with pruning re-applied at `beta`.
Forest prune_forest(const Forest& forest, double beta);

/// Indices of the top max(1, floor(beta * phi.size())) entries of phi,
/// descending, ties by ascending index, -inf last.
std::vector<std::size_t> select_top(std::span<const double> phi, double beta);

inline constexpr int kForestFormatVersion = 1;

nlohmann::json forest_to_json(const Forest& forest);
Forest forest_from_json(const nlohmann::json& json);

}  // namespace rfod
