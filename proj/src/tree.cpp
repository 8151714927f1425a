#include "rfod/tree.hpp"

#include "rfod/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rfod {

ResolvedTreeConfig resolve(const TreeConfig& config, TreeMode mode, std::size_t n_predictors) {
    if (n_predictors == 0) throw ConfigError("a tree needs at least one predictor");
    ResolvedTreeConfig r;
    const auto p = static_cast<double>(n_predictors);
    const std::size_t default_mtry = mode == TreeMode::Classification
                                         ? static_cast<std::size_t>(std::ceil(std::sqrt(p)))
                                         : static_cast<std::size_t>(std::ceil(p / 3.0));
    r.mtry = config.mtry.value_or(std::clamp<std::size_t>(default_mtry, 1, n_predictors));
    if (r.mtry < 1 || r.mtry > n_predictors)
        throw ConfigError("mtry must be in [1, " + std::to_string(n_predictors) + "], got " + std::to_string(r.mtry));
    if (config.max_depth) r.max_depth = *config.max_depth;
    r.min_samples_leaf = config.min_samples_leaf.value_or(mode == TreeMode::Classification ? 1 : 5);
    if (r.min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be at least 1");
    r.min_samples_split = config.min_samples_split.value_or(std::max<std::size_t>(2, 2 * r.min_samples_leaf));
    if (r.min_samples_split < 2 * r.min_samples_leaf)
        throw ConfigError("min_samples_split must be at least 2 * min_samples_leaf");
    r.max_categorical_partitions = config.max_categorical_partitions;
    if (r.max_categorical_partitions < 1) throw ConfigError("max_categorical_partitions must be at least 1");
    return r;
}

TreeTarget TreeTarget::from_column(const Column& column) {
    TreeTarget t;
    if (column.kind == FeatureKind::Numerical) {
        t.mode = TreeMode::Regression;
        t.values = column.values;
    } else {
        t.mode = TreeMode::Classification;
        t.classes = column.codes;
        t.n_classes = column.dictionary.size();
    }
    return t;
}

// ---------------------------------------------------------------------------

Tree::Tree(TreeMode mode, std::size_t n_classes, std::vector<TreeNode> nodes)
    : mode_(mode), n_classes_(n_classes), nodes_(std::move(nodes)) {
    if (nodes_.empty()) throw InputError("tree has no nodes");
    const auto n = static_cast<std::int32_t>(nodes_.size());
    for (const auto& node : nodes_) {
        if (node.rule) {
            if (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n)
                throw InputError("tree node has an invalid child index");
        } else if (mode_ == TreeMode::Classification && node.class_counts.size() != n_classes_) {
            throw InputError("leaf histogram size does not match class count");
        }
    }
}

std::int32_t Tree::route(const TreeNode& node, double value) const {
    const SplitRule& rule = *node.rule;
    if (!rule.categorical) return value <= rule.threshold ? node.left : node.right;
    const auto id = static_cast<std::int32_t>(value);
    if (std::binary_search(rule.left_set.begin(), rule.left_set.end(), id)) return node.left;
    if (std::binary_search(rule.right_set.begin(), rule.right_set.end(), id)) return node.right;
    const auto& l = nodes_[static_cast<std::size_t>(node.left)];
    const auto& r = nodes_[static_cast<std::size_t>(node.right)];
    return l.n_samples >= r.n_samples ? node.left : node.right;
}

std::vector<double> Tree::leaf_proba(const TreeNode& leaf) const {
    std::vector<double> p(n_classes_, 0.0);
    if (leaf.n_samples == 0) return p;
    const double n = static_cast<double>(leaf.n_samples);
    for (std::size_t k = 0; k < n_classes_; ++k) p[k] = static_cast<double>(leaf.class_counts[k]) / n;
    return p;
}

std::size_t Tree::depth() const {
    std::vector<std::size_t> d(nodes_.size(), 0);
    std::size_t best = 0;
    // children always follow their parent in the node list
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        best = std::max(best, d[i]);
        if (nodes_[i].rule) {
            d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
        }
    }
    return best;
}

std::size_t Tree::n_leaves() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) { return n.is_leaf(); }));
}

bool Tree::references_feature(std::size_t feature) const {
    return std::any_of(nodes_.begin(), nodes_.end(),
                       [&](const TreeNode& n) { return n.rule && n.rule->feature == feature; });
}

// ---------------------------------------------------------------------------
// Fitting

namespace {

constexpr double kRelativeMinGain = 1e-10;

struct Candidate {
    bool valid = false;
    double gain = 0.0;
    SplitRule rule;
};

/// Per-category accumulator at one node.
struct CategoryStats {
    std::int32_t id = 0;
    std::size_t count = 0;
    double sum = 0.0;                   // regression (centered targets)
    std::vector<std::size_t> counts;    // classification
};

double sum_squares(const std::vector<std::size_t>& counts) {
    double s = 0.0;
    for (auto c : counts) s += static_cast<double>(c) * static_cast<double>(c);
    return s;
}

class TreeBuilder {
public:
    TreeBuilder(const Table& data, std::span<const std::size_t> predictors, const TreeTarget& target,
                const ResolvedTreeConfig& config, std::mt19937_64& rng)
        : data_(data), target_(target), config_(config), rng_(rng), features_(predictors.begin(), predictors.end()) {}

    Tree build(std::span<const std::uint32_t> sample_ids) {
        std::vector<std::uint32_t> samples(sample_ids.begin(), sample_ids.end());
        // numerical predictors are sorted once here; children inherit stably
        // partitioned copies, so no node re-sorts
        sorted_slot_.assign(data_.n_features(), -1);
        std::vector<std::vector<std::uint32_t>> sorted;
        for (auto f : features_) {
            if (data_.kind(f) != FeatureKind::Numerical) continue;
            sorted_slot_[f] = static_cast<std::int32_t>(sorted.size());
            const auto& x = data_.column(f).values;
            auto& list = sorted.emplace_back(samples);
            std::sort(list.begin(), list.end(), [&](auto a, auto b) { return x[a] < x[b] || (x[a] == x[b] && a < b); });
        }
        goes_left_.assign(data_.n_rows(), 0);
        grow(samples, sorted, 0);
        const std::size_t k = target_.mode == TreeMode::Classification ? target_.n_classes : 0;
        return Tree(target_.mode, k, std::move(nodes_));
    }

private:
    bool classification() const { return target_.mode == TreeMode::Classification; }

    std::int32_t grow(std::vector<std::uint32_t>& samples, std::vector<std::vector<std::uint32_t>>& sorted,
                      std::size_t depth) {
        const auto index = static_cast<std::int32_t>(nodes_.size());
        nodes_.emplace_back();
        TreeNode node;
        node.n_samples = samples.size();

        double impurity = 0.0;
        bool pure = true;
        if (classification()) {
            node.class_counts.assign(target_.n_classes, 0);
            for (auto s : samples) ++node.class_counts[static_cast<std::size_t>(target_.classes[s])];
            std::vector<std::size_t> c(node.class_counts.begin(), node.class_counts.end());
            const double n = static_cast<double>(samples.size());
            impurity = n - sum_squares(c) / n;
            pure = std::count_if(c.begin(), c.end(), [](auto x) { return x > 0; }) <= 1;
        } else {
            double sum = 0.0;
            for (auto s : samples) sum += target_.values[s];
            node.mean = sum / static_cast<double>(samples.size());
            const double first = target_.values[samples.front()];
            for (auto s : samples) {
                const double d = target_.values[s] - node.mean;
                impurity += d * d;
                if (target_.values[s] != first) pure = false;
            }
        }

        const bool stop = pure || samples.size() < config_.min_samples_split || depth >= config_.max_depth;
        if (!stop) {
            Candidate best = find_split(samples, sorted, node, kRelativeMinGain * impurity);
            if (best.valid) {
                std::vector<std::uint32_t> left, right;
                left.reserve(samples.size());
                right.reserve(samples.size());
                const auto& col = data_.column(best.rule.feature);
                for (auto s : samples) {
                    const bool go_left = best.rule.categorical
                                             ? std::binary_search(best.rule.left_set.begin(), best.rule.left_set.end(),
                                                                  col.codes[s])
                                             : col.values[s] <= best.rule.threshold;
                    goes_left_[s] = go_left;
                    (go_left ? left : right).push_back(s);
                }
                std::vector<std::vector<std::uint32_t>> sorted_left(sorted.size()), sorted_right(sorted.size());
                for (std::size_t f = 0; f < sorted.size(); ++f) {
                    sorted_left[f].reserve(left.size());
                    sorted_right[f].reserve(right.size());
                    for (auto s : sorted[f]) (goes_left_[s] ? sorted_left[f] : sorted_right[f]).push_back(s);
                }
                samples.clear();
                samples.shrink_to_fit();
                sorted.clear();
                sorted.shrink_to_fit();
                node.rule = std::move(best.rule);
                node.class_counts.clear();  // internal nodes keep only the sample count
                node.mean = 0.0;
                node.left = grow(left, sorted_left, depth + 1);
                node.right = grow(right, sorted_right, depth + 1);
            }
        }
        nodes_[static_cast<std::size_t>(index)] = std::move(node);
        return index;
    }

    /// Draws mtry predictors without replacement and keeps the best split
    /// among them. When none of them splits, further predictors are drawn one
    /// at a time until one does or the pool is exhausted.
    Candidate find_split(const std::vector<std::uint32_t>& samples, const std::vector<std::vector<std::uint32_t>>& sorted,
                         const TreeNode& node, double min_gain) {
        auto draw = [&](std::size_t i) {
            std::uniform_int_distribution<std::size_t> pick(i, features_.size() - 1);
            std::swap(features_[i], features_[pick(rng_)]);
        };
        auto evaluate = [&](std::size_t f) {
            Candidate c = data_.kind(f) == FeatureKind::Numerical
                              ? numeric_split(f, sorted[static_cast<std::size_t>(sorted_slot_[f])], node)
                              : categorical_split(f, samples, node);
            c.valid = c.valid && c.gain > min_gain;
            return c;
        };
        for (std::size_t i = 0; i < config_.mtry; ++i) draw(i);
        std::vector<std::size_t> chosen(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(config_.mtry));
        std::sort(chosen.begin(), chosen.end());

        Candidate best;
        for (auto f : chosen) {
            Candidate c = evaluate(f);
            if (c.valid && (!best.valid || c.gain > best.gain)) best = std::move(c);
        }
        for (std::size_t i = config_.mtry; !best.valid && i < features_.size(); ++i) {
            draw(i);
            best = evaluate(features_[i]);
        }
        return best;
    }

    /// `sorted` holds the node's samples ordered by (value, row).
    Candidate numeric_split(std::size_t feature, const std::vector<std::uint32_t>& sorted, const TreeNode& node) {
        const auto& x = data_.column(feature).values;
        const std::size_t n = sorted.size();
        const std::size_t min_leaf = config_.min_samples_leaf;
        Candidate best;

        struct Entry {
            double first;
            std::uint32_t second;
        };
        std::vector<Entry> order;
        order.reserve(n);
        for (auto s : sorted) order.push_back({x[s], s});

        auto consider = [&](std::size_t i, double gain) {
            // left = order[0..i]
            if (best.valid && !(gain > best.gain)) return;
            const double lo = order[i].first;
            const double hi = order[i + 1].first;
            double mid = lo / 2.0 + hi / 2.0;
            if (!(mid < hi) || mid < lo) mid = lo;
            best.valid = true;
            best.gain = gain;
            best.rule = SplitRule{feature, false, mid, {}, {}};
        };

        if (classification()) {
            const std::size_t k = target_.n_classes;
            std::vector<std::size_t> left(k, 0), right(node.class_counts.begin(), node.class_counts.end());
            double sq_left = 0.0;
            double sq_right = sum_squares(right);
            const double parent = sq_right / static_cast<double>(n);
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const auto c = static_cast<std::size_t>(target_.classes[order[i].second]);
                sq_left += 2.0 * static_cast<double>(left[c]) + 1.0;
                sq_right -= 2.0 * static_cast<double>(right[c]) - 1.0;
                ++left[c];
                --right[c];
                const std::size_t n_left = i + 1;
                if (order[i].first == order[i + 1].first) continue;
                if (n_left < min_leaf || n - n_left < min_leaf) continue;
                const double gain = sq_left / static_cast<double>(n_left) +
                                    sq_right / static_cast<double>(n - n_left) - parent;
                consider(i, gain);
            }
        } else {
            double total = 0.0;
            for (const auto& [v, s] : order) total += target_.values[s] - node.mean;
            const double parent = total * total / static_cast<double>(n);
            double sum_left = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                sum_left += target_.values[order[i].second] - node.mean;
                const std::size_t n_left = i + 1;
                if (order[i].first == order[i + 1].first) continue;
                if (n_left < min_leaf || n - n_left < min_leaf) continue;
                const double sum_right = total - sum_left;
                const double gain = sum_left * sum_left / static_cast<double>(n_left) +
                                    sum_right * sum_right / static_cast<double>(n - n_left) - parent;
                consider(i, gain);
            }
        }
        return best;
    }

    std::vector<CategoryStats> category_stats(std::size_t feature, const std::vector<std::uint32_t>& samples,
                                              const TreeNode& node) const {
        const auto& col = data_.column(feature);
        std::vector<CategoryStats> by_id(col.dictionary.size());
        for (auto s : samples) {
            auto& st = by_id[static_cast<std::size_t>(col.codes[s])];
            ++st.count;
            if (classification()) {
                if (st.counts.empty()) st.counts.assign(target_.n_classes, 0);
                ++st.counts[static_cast<std::size_t>(target_.classes[s])];
            } else {
                st.sum += target_.values[s] - node.mean;
            }
        }
        std::vector<CategoryStats> present;
        for (std::size_t id = 0; id < by_id.size(); ++id) {
            if (by_id[id].count == 0) continue;
            by_id[id].id = static_cast<std::int32_t>(id);
            present.push_back(std::move(by_id[id]));
        }
        return present;
    }

    /// Scores the partition given by `in_left` (indexed like `cats`), storing it in
    /// `best` when it wins. The side holding the smallest category id is always
    /// stored as the left set.
    void score_partition(std::size_t feature, const std::vector<CategoryStats>& cats, const std::vector<bool>& in_left,
                         const TreeNode& node, Candidate& best) const {
        std::size_t n_left = 0, n_right = 0;
        double sum_left = 0.0, sum_right = 0.0;
        std::vector<std::size_t> cl, cr;
        if (classification()) {
            cl.assign(target_.n_classes, 0);
            cr.assign(target_.n_classes, 0);
        }
        for (std::size_t c = 0; c < cats.size(); ++c) {
            auto& n_side = in_left[c] ? n_left : n_right;
            n_side += cats[c].count;
            if (classification()) {
                auto& counts = in_left[c] ? cl : cr;
                for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += cats[c].counts[k];
            } else {
                (in_left[c] ? sum_left : sum_right) += cats[c].sum;
            }
        }
        if (n_left < config_.min_samples_leaf || n_right < config_.min_samples_leaf) return;
        const double n = static_cast<double>(n_left + n_right);
        double gain;
        if (classification()) {
            std::vector<std::size_t> parent(node.class_counts.begin(), node.class_counts.end());
            gain = sum_squares(cl) / static_cast<double>(n_left) + sum_squares(cr) / static_cast<double>(n_right) -
                   sum_squares(parent) / n;
        } else {
            const double total = sum_left + sum_right;
            gain = sum_left * sum_left / static_cast<double>(n_left) +
                   sum_right * sum_right / static_cast<double>(n_right) - total * total / n;
        }

        SplitRule rule{feature, true, 0.0, {}, {}};
        for (std::size_t c = 0; c < cats.size(); ++c) (in_left[c] ? rule.left_set : rule.right_set).push_back(cats[c].id);
        // cats are in ascending id order, so both sets are already sorted
        if (!in_left.front()) std::swap(rule.left_set, rule.right_set);

        if (best.valid) {
            if (gain < best.gain) return;
            if (gain == best.gain && !(rule.left_set < best.rule.left_set)) return;
        }
        best.valid = true;
        best.gain = gain;
        best.rule = std::move(rule);
    }

    Candidate categorical_split(std::size_t feature, const std::vector<std::uint32_t>& samples, const TreeNode& node) {
        Candidate best;
        auto cats = category_stats(feature, samples, node);
        const std::size_t k = cats.size();
        if (k < 2) return best;

        const bool ordered = !classification() || target_.n_classes <= 2;
        if (ordered) {
            // sort by mean target (or positive-class rate) and cut prefixes
            std::vector<std::size_t> order(k);
            std::iota(order.begin(), order.end(), 0);
            auto key = [&](std::size_t c) {
                const auto& st = cats[c];
                if (!classification()) return st.sum / static_cast<double>(st.count);
                return st.counts.size() > 1 ? static_cast<double>(st.counts[1]) / static_cast<double>(st.count) : 0.0;
            };
            std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return key(a) < key(b); });
            std::vector<bool> in_left(k, false);
            for (std::size_t cut = 1; cut < k; ++cut) {
                in_left[order[cut - 1]] = true;
                score_partition(feature, cats, in_left, node, best);
            }
            return best;
        }

        // multiclass: the first category stays left; enumerate or sample the rest
        const std::size_t others = k - 1;
        const std::size_t budget = config_.max_categorical_partitions;
        std::vector<bool> in_left(k, false);
        in_left[0] = true;
        if (others < 63 && ((std::uint64_t{1} << others) - 1) <= budget) {
            const std::uint64_t limit = (std::uint64_t{1} << others) - 1;  // all-left excluded
            for (std::uint64_t mask = 0; mask < limit; ++mask) {
                for (std::size_t c = 1; c < k; ++c) in_left[c] = (mask >> (c - 1)) & 1U;
                score_partition(feature, cats, in_left, node, best);
            }
            return best;
        }
        std::size_t drawn = 0;
        for (std::size_t attempt = 0; attempt < 4 * budget && drawn < budget; ++attempt) {
            bool any_right = false;
            for (std::size_t c = 1; c < k; ++c) {
                in_left[c] = (rng_() & 1U) != 0;
                any_right = any_right || !in_left[c];
            }
            if (!any_right) continue;
            ++drawn;
            score_partition(feature, cats, in_left, node, best);
        }
        return best;
    }

    const Table& data_;
    const TreeTarget& target_;
    const ResolvedTreeConfig& config_;
    std::mt19937_64& rng_;
    std::vector<std::size_t> features_;
    std::vector<TreeNode> nodes_;
    std::vector<std::int32_t> sorted_slot_;  // feature -> index into the sorted lists, -1 if none
    std::vector<char> goes_left_;
};

}  // namespace

Tree fit_tree(const Table& data, std::span<const std::size_t> predictors, const TreeTarget& target,
              std::span<const std::uint32_t> sample_ids, const ResolvedTreeConfig& config, std::mt19937_64& rng) {
    if (sample_ids.empty()) throw ConfigError("fit_tree needs at least one sample");
    if (predictors.empty()) throw ConfigError("fit_tree needs at least one predictor");
    if (config.mtry < 1 || config.mtry > predictors.size()) throw ConfigError("mtry out of range for predictor count");
    if (target.mode == TreeMode::Classification && target.n_classes == 0)
        throw ConfigError("classification target has no classes");
    for (auto f : predictors)
        if (f >= data.n_features()) throw ConfigError("predictor index out of range");
    TreeBuilder builder(data, predictors, target, config, rng);
    return builder.build(sample_ids);
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json tree_to_json(const Tree& tree) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes()) {
        nlohmann::json j = {{"n", n.n_samples}};
        if (n.rule) {
            j["feature"] = n.rule->feature;
            if (n.rule->categorical) {
                j["left_set"] = n.rule->left_set;
                j["right_set"] = n.rule->right_set;
            } else {
                j["threshold"] = n.rule->threshold;
            }
            j["left"] = n.left;
            j["right"] = n.right;
        } else if (tree.mode() == TreeMode::Classification) {
            j["counts"] = n.class_counts;
        } else {
            j["mean"] = n.mean;
        }
        nodes.push_back(std::move(j));
    }
    return {{"mode", tree.mode() == TreeMode::Regression ? "regression" : "classification"},
            {"n_classes", tree.n_classes()},
            {"nodes", std::move(nodes)}};
}

Tree tree_from_json(const nlohmann::json& json) {
    try {
        const auto mode_text = json.at("mode").get<std::string>();
        if (mode_text != "regression" && mode_text != "classification")
            throw InputError("unknown tree mode '" + mode_text + "'");
        const TreeMode mode = mode_text == "regression" ? TreeMode::Regression : TreeMode::Classification;
        std::vector<TreeNode> nodes;
        for (const auto& j : json.at("nodes")) {
            TreeNode n;
            n.n_samples = j.at("n").get<std::size_t>();
            if (j.contains("feature")) {
                SplitRule r;
                r.feature = j.at("feature").get<std::size_t>();
                if (j.contains("threshold")) {
                    r.threshold = j.at("threshold").get<double>();
                } else {
                    r.categorical = true;
                    r.left_set = j.at("left_set").get<std::vector<std::int32_t>>();
                    r.right_set = j.at("right_set").get<std::vector<std::int32_t>>();
                }
                n.rule = std::move(r);
                n.left = j.at("left").get<std::int32_t>();
                n.right = j.at("right").get<std::int32_t>();
            } else if (mode == TreeMode::Classification) {
                n.class_counts = j.at("counts").get<std::vector<std::uint32_t>>();
            } else {
                n.mean = j.at("mean").get<double>();
            }
            nodes.push_back(std::move(n));
        }
        return Tree(mode, json.at("n_classes").get<std::size_t>(), std::move(nodes));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed tree: ") + e.what());
    }
}

}  // namespace rfod
