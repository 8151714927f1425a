#include "rfod/forest.hpp"

#include "rfod/error.hpp"
#include "rfod/metrics.hpp"
#include "rfod/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rfod {

Forest::Forest(TreeMode mode, std::vector<std::string> classes, std::vector<TreeRecord> trees)
    : mode_(mode), classes_(std::move(classes)), trees_(std::move(trees)) {
    if (trees_.empty()) throw ConfigError("a forest needs at least one tree");
    for (const auto& r : trees_) {
        if (r.tree.mode() != mode_) throw InputError("tree mode disagrees with forest mode");
        if (mode_ == TreeMode::Classification && r.tree.n_classes() != classes_.size())
            throw InputError("tree class count disagrees with forest class dictionary");
    }
    apply_pruning(1.0);
}

std::vector<std::size_t> Forest::ranking() const {
    std::vector<double> phi;
    phi.reserve(trees_.size());
    for (const auto& r : trees_) phi.push_back(r.phi);
    return select_top(phi, 1.0);
}

std::size_t retained_count(std::size_t t, double beta) {
    if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta must be in (0, 1]");
    // the 1e-9 slack keeps e.g. 0.29 * 100 from flooring to 28
    const double product = beta * static_cast<double>(t);
    const auto k = static_cast<std::size_t>(std::floor(product + 1e-9 * std::max(1.0, product)));
    return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(t, 1));
}

std::vector<std::size_t> select_top(std::span<const double> phi, double beta) {
    const std::size_t k = retained_count(phi.size(), beta);
    std::vector<std::size_t> order(phi.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return phi[a] > phi[b]; });
    order.resize(std::min(k, order.size()));
    return order;
}

void Forest::apply_pruning(double beta) {
    auto ranked = ranking();
    ranked.resize(retained_count(trees_.size(), beta));
    // index order, so beta = 1 sums exactly like an unpruned forest
    std::sort(ranked.begin(), ranked.end());
    active_ = std::move(ranked);
    beta_ = beta;
}

bool Forest::references_feature(std::size_t feature) const {
    return std::any_of(trees_.begin(), trees_.end(), [&](const auto& r) { return r.tree.references_feature(feature); });
}

Forest prune_forest(const Forest& forest, double beta) {
    Forest out = forest;
    out.apply_pruning(beta);
    return out;
}

// ---------------------------------------------------------------------------

Aggregate aggregate(const TreePredictions& per_tree, TreeMode mode) {
    Aggregate out;
    if (mode == TreeMode::Regression) {
        const auto& v = per_tree.values;
        if (v.empty()) throw ConfigError("aggregate needs at least one prediction");
        const double n = static_cast<double>(v.size());
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        out.point = mean;
        out.uncertainty = std::sqrt(ss / n);
        return out;
    }
    const auto& probas = per_tree.probas;
    if (probas.empty()) throw ConfigError("aggregate needs at least one prediction");
    const std::size_t k = probas.front().size();
    out.proba.assign(k, 0.0);
    for (const auto& p : probas)
        for (std::size_t c = 0; c < k; ++c) out.proba[c] += p[c];
    const double n = static_cast<double>(probas.size());
    for (auto& p : out.proba) p /= n;

    auto argmax = [](const std::vector<double>& p) {
        return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    };
    const std::size_t vote = k ? argmax(out.proba) : 0;
    out.point = static_cast<double>(vote);
    std::size_t agree = 0;
    for (const auto& p : probas)
        if (k && argmax(p) == vote) ++agree;
    const double share = static_cast<double>(agree) / n;
    out.uncertainty = std::sqrt(share * (1.0 - share));
    return out;
}

// ---------------------------------------------------------------------------

double oob_score(const Tree& tree, std::span<const std::uint32_t> oob, const Table& data, const TreeTarget& target) {
    if (oob.empty()) return -std::numeric_limits<double>::infinity();

    if (target.mode == TreeMode::Regression) {
        double mean = 0.0;
        for (auto r : oob) mean += target.values[r];
        mean /= static_cast<double>(oob.size());
        double sse = 0.0, sst = 0.0;
        for (auto r : oob) {
            const double y = target.values[r];
            const double e = y - tree.predict_value(TableRow{&data, r});
            sse += e * e;
            sst += (y - mean) * (y - mean);
        }
        if (sst == 0.0) return sse == 0.0 ? 1.0 : 0.0;
        return 1.0 - sse / sst;
    }

    const std::size_t k = target.n_classes;
    std::vector<std::vector<double>> probas;
    probas.reserve(oob.size());
    std::vector<std::size_t> class_count(k, 0);
    for (auto r : oob) {
        probas.push_back(tree.predict_proba(TableRow{&data, r}));
        ++class_count[static_cast<std::size_t>(target.classes[r])];
    }
    double total = 0.0;
    std::size_t used = 0;
    std::vector<double> scores(oob.size());
    std::vector<std::uint8_t> labels(oob.size());
    for (std::size_t c = 0; c < k; ++c) {
        if (class_count[c] == 0 || class_count[c] == oob.size()) continue;
        for (std::size_t i = 0; i < oob.size(); ++i) {
            scores[i] = probas[i][c];
            labels[i] = static_cast<std::size_t>(target.classes[oob[i]]) == c ? 1 : 0;
        }
        total += auc_roc(scores, labels);
        ++used;
        if (k == 2) break;  // both one-vs-rest curves coincide for two classes
    }
    return used ? total / static_cast<double>(used) : 0.5;
}

double oob_score(const Forest& forest, std::size_t tree_index, const Table& data, std::size_t target) {
    const auto& rec = forest.trees().at(tree_index);
    return oob_score(rec.tree, rec.oob, data, TreeTarget::from_column(data.column(target)));
}

TreeRecord grow_tree(const Table& data, std::span<const std::size_t> predictors, const TreeTarget& target,
                     const ResolvedTreeConfig& config, double bootstrap_fraction, std::uint64_t tree_seed,
                     bool score_oob) {
    const std::size_t n = data.n_rows();
    std::mt19937_64 rng(tree_seed);
    const auto draws = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(bootstrap_fraction * static_cast<double>(n))));

    TreeRecord rec;
    rec.bootstrap.reserve(draws);
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));
    for (std::size_t i = 0; i < draws; ++i) rec.bootstrap.push_back(pick(rng));
    std::sort(rec.bootstrap.begin(), rec.bootstrap.end());

    std::vector<bool> drawn(n, false);
    for (auto r : rec.bootstrap) drawn[r] = true;
    for (std::uint32_t r = 0; r < n; ++r)
        if (!drawn[r]) rec.oob.push_back(r);

    rec.tree = fit_tree(data, predictors, target, rec.bootstrap, config, rng);
    if (score_oob) rec.phi = oob_score(rec.tree, rec.oob, data, target);
    return rec;
}

Forest assemble_forest(const Table& data, std::size_t target, std::vector<TreeRecord> trees) {
    const Column& col = data.column(target);
    if (col.kind == FeatureKind::Numerical) return Forest(TreeMode::Regression, {}, std::move(trees));
    return Forest(TreeMode::Classification, col.dictionary, std::move(trees));
}

Forest fit_forest(const Table& data, std::span<const std::size_t> predictors, std::size_t target,
                  const ForestConfig& config, std::uint64_t seed, std::size_t threads) {
    if (config.t == 0) throw ConfigError("number of trees must be at least 1");
    if (!(config.bootstrap_fraction > 0.0)) throw ConfigError("bootstrap_fraction must be positive");
    if (data.n_rows() < 2) throw ConfigError("a forest needs at least 2 training rows");
    if (target >= data.n_features()) throw ConfigError("target column out of range");
    if (std::find(predictors.begin(), predictors.end(), target) != predictors.end())
        throw ConfigError("the target column cannot also be a predictor");

    const TreeTarget tree_target = TreeTarget::from_column(data.column(target));
    const ResolvedTreeConfig resolved = resolve(config.tree, tree_target.mode, predictors.size());

    std::vector<TreeRecord> trees(config.t);
    parallel_for(config.t, threads, [&](std::size_t i) {
        trees[i] = grow_tree(data, predictors, tree_target, resolved, config.bootstrap_fraction, derive_seed(seed, i));
    });
    return assemble_forest(data, target, std::move(trees));
}

// ---------------------------------------------------------------------------

nlohmann::json forest_to_json(const Forest& forest) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& r : forest.trees()) {
        nlohmann::json phi = std::isfinite(r.phi) ? nlohmann::json(r.phi) : nlohmann::json(nullptr);
        trees.push_back({{"tree", tree_to_json(r.tree)}, {"phi", phi}});
    }
    return {{"format", "rfod-forest"},
            {"version", kForestFormatVersion},
            {"mode", forest.mode() == TreeMode::Regression ? "regression" : "classification"},
            {"classes", forest.classes()},
            {"t_total", forest.t_total()},
            {"beta", forest.beta()},
            {"active", forest.active()},
            {"trees", std::move(trees)}};
}

Forest forest_from_json(const nlohmann::json& json) {
    try {
        if (json.at("format").get<std::string>() != "rfod-forest") throw InputError("not a forest file");
        const int version = json.at("version").get<int>();
        if (version != kForestFormatVersion)
            throw InputError("unsupported forest format version " + std::to_string(version));
        const auto mode_text = json.at("mode").get<std::string>();
        const TreeMode mode = mode_text == "regression" ? TreeMode::Regression : TreeMode::Classification;
        std::vector<TreeRecord> trees;
        for (const auto& t : json.at("trees")) {
            TreeRecord r;
            r.tree = tree_from_json(t.at("tree"));
            r.phi = t.at("phi").is_null() ? -std::numeric_limits<double>::infinity() : t.at("phi").get<double>();
            trees.push_back(std::move(r));
        }
        if (trees.size() != json.at("t_total").get<std::size_t>()) throw InputError("forest t_total disagrees with tree list");
        Forest forest(mode, json.at("classes").get<std::vector<std::string>>(), std::move(trees));
        forest.apply_pruning(json.at("beta").get<double>());
        if (forest.active() != json.at("active").get<std::vector<std::size_t>>())
            throw InputError("stored active set disagrees with the phi ranking");
        return forest;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed forest: ") + e.what());
    }
}

}  // namespace rfod
