#include "rfod/engine.hpp"

#include "rfod/error.hpp"
#include "rfod/parallel.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace rfod {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::size_t> predictors_for(std::size_t target, std::size_t d) {
    std::vector<std::size_t> p;
    p.reserve(d - 1);
    for (std::size_t f = 0; f < d; ++f)
        if (f != target) p.push_back(f);
    return p;
}

constexpr std::size_t kRowBlock = 256;

}  // namespace

void ScoringOptions::validate() const {
    if (!(alpha > 0.0 && alpha < 0.5)) throw ConfigError("alpha must be in (0, 0.5)");
    if (!(score_cap > 0.0)) throw ConfigError("quantile cap must be positive");
}

void RfodConfig::validate() const {
    scoring.validate();
    if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta must be in (0, 1]");
    if (forest.t < 1) throw ConfigError("trees must be at least 1");
    if (!(forest.bootstrap_fraction > 0.0)) throw ConfigError("bootstrap fraction must be positive");
    if (forest.tree.mtry && *forest.tree.mtry < 1) throw ConfigError("mtry must be at least 1");
    if (forest.tree.max_categorical_partitions < 1) throw ConfigError("max categorical partitions must be at least 1");
}

RfodModel::RfodModel(Schema schema, std::vector<std::vector<std::string>> dictionaries, std::vector<Forest> forests,
                     QuantileProfile profile, RfodConfig config)
    : schema_(std::move(schema)),
      dictionaries_(std::move(dictionaries)),
      forests_(std::move(forests)),
      profile_(std::move(profile)),
      config_(std::move(config)) {
    const std::size_t d = schema_.size();
    if (forests_.size() != d) throw InputError("model needs exactly one forest per feature");
    if (dictionaries_.size() != d) throw InputError("model needs one dictionary slot per feature");
    if (profile_.size() != d) throw InputError("quantile profile does not cover every feature");
    for (std::size_t j = 0; j < d; ++j) {
        const bool numerical = schema_[j].kind == FeatureKind::Numerical;
        if (numerical != profile_.is_numerical(j)) throw InputError("quantile profile kind disagrees with schema");
        if (forests_[j].mode() != (numerical ? TreeMode::Regression : TreeMode::Classification))
            throw InputError("forest mode disagrees with the kind of feature '" + schema_[j].name + "'");
        if (!numerical && forests_[j].classes() != dictionaries_[j])
            throw InputError("forest classes disagree with the dictionary of feature '" + schema_[j].name + "'");
        if (forests_[j].references_feature(j))
            throw InputError("forest for feature '" + schema_[j].name + "' splits on its own target");
    }
}

RfodModel RfodModel::with_beta(double beta) const {
    RfodModel out = *this;
    out.config_.beta = beta;
    out.config_.validate();
    for (auto& f : out.forests_) f.apply_pruning(beta);
    return out;
}

RfodModel RfodModel::with_scoring(const ScoringOptions& scoring) const {
    scoring.validate();
    RfodModel out = *this;
    out.config_.scoring = scoring;
    return out;
}

double FitTimings::time_per_feature() const {
    if (per_feature.empty()) return 0.0;
    return std::accumulate(per_feature.begin(), per_feature.end(), 0.0) / static_cast<double>(per_feature.size());
}

RfodModel fit(const Table& train, const RfodConfig& config, std::size_t threads, FitTimings* timings) {
    config.validate();
    const std::size_t d = train.n_features();
    const std::size_t n = train.n_rows();
    if (d < 2) throw ConfigError("at least 2 features are required");
    if (n < 2) throw ConfigError("at least 2 training rows are required");
    const auto start = Clock::now();

    struct FeaturePlan {
        std::vector<std::size_t> predictors;
        TreeTarget target;
        ResolvedTreeConfig tree;
        std::uint64_t seed;
    };
    std::vector<FeaturePlan> plans;
    plans.reserve(d);
    for (std::size_t j = 0; j < d; ++j) {
        FeaturePlan p;
        p.predictors = predictors_for(j, d);
        p.target = TreeTarget::from_column(train.column(j));
        p.tree = resolve(config.forest.tree, p.target.mode, p.predictors.size());
        p.seed = derive_seed(config.seed, j);
        plans.push_back(std::move(p));
    }

    // one task per (feature, tree); slot (j, i) is written only by its task
    const std::size_t t = config.forest.t;
    std::vector<std::vector<TreeRecord>> trees(d, std::vector<TreeRecord>(t));
    std::vector<double> task_seconds(d * t, 0.0);
    parallel_for(d * t, threads, [&](std::size_t task) {
        const std::size_t j = task / t;
        const std::size_t i = task % t;
        const auto& plan = plans[j];
        const auto task_start = Clock::now();
        trees[j][i] = grow_tree(train, plan.predictors, plan.target, plan.tree, config.forest.bootstrap_fraction,
                                derive_seed(plan.seed, i), false);
        task_seconds[task] = seconds_since(task_start);
    });

    const auto prune_start = Clock::now();
    parallel_for(d * t, threads, [&](std::size_t task) {
        const std::size_t j = task / t;
        auto& rec = trees[j][task % t];
        rec.phi = oob_score(rec.tree, rec.oob, train, plans[j].target);
    });
    std::vector<Forest> forests;
    forests.reserve(d);
    for (std::size_t j = 0; j < d; ++j) {
        forests.push_back(assemble_forest(train, j, std::move(trees[j])));
        forests.back().apply_pruning(config.beta);
    }
    const double prune_seconds = seconds_since(prune_start);

    std::vector<std::vector<std::string>> dictionaries(d);
    for (std::size_t j = 0; j < d; ++j) dictionaries[j] = train.column(j).dictionary;
    RfodModel model(train.schema(), std::move(dictionaries), std::move(forests), QuantileProfile(train), config);

    if (timings) {
        timings->per_feature.assign(d, 0.0);
        for (std::size_t task = 0; task < d * t; ++task) timings->per_feature[task / t] += task_seconds[task];
        timings->prune = prune_seconds;
        timings->total = seconds_since(start);
    }
    return model;
}

Table align_to_model(const RfodModel& model, const Table& test) {
    const Schema& schema = model.schema();
    if (!schema.same_features(test.schema())) {
        const auto& a = schema.columns();
        const auto& b = test.schema().columns();
        if (a.size() != b.size())
            throw SchemaMismatch("test data has " + std::to_string(b.size()) + " features, model has " +
                                 std::to_string(a.size()));
        for (std::size_t j = 0; j < a.size(); ++j) {
            if (a[j].name != b[j].name)
                throw SchemaMismatch("feature " + std::to_string(j) + " is '" + b[j].name + "', model expects '" +
                                     a[j].name + "'");
            if (a[j].kind != b[j].kind)
                throw SchemaMismatch("feature '" + a[j].name + "' has kind " + std::string(to_string(b[j].kind)) +
                                     ", model expects " + std::string(to_string(a[j].kind)));
        }
    }
    std::vector<Column> columns;
    columns.reserve(test.n_features());
    for (std::size_t j = 0; j < test.n_features(); ++j) {
        const Column& src = test.column(j);
        if (src.kind == FeatureKind::Numerical) {
            columns.push_back(src);
            continue;
        }
        Column out;
        out.kind = FeatureKind::Categorical;
        out.dictionary = model.dictionaries()[j];
        std::unordered_map<std::string, std::int32_t> ids;
        for (std::size_t k = 0; k < out.dictionary.size(); ++k) ids.emplace(out.dictionary[k], static_cast<std::int32_t>(k));
        std::vector<std::int32_t> remap(src.dictionary.size());
        for (std::size_t k = 0; k < src.dictionary.size(); ++k) {
            auto [it, inserted] = ids.try_emplace(src.dictionary[k], static_cast<std::int32_t>(out.dictionary.size()));
            if (inserted) out.dictionary.push_back(src.dictionary[k]);
            remap[k] = it->second;
        }
        out.codes.reserve(src.codes.size());
        for (auto c : src.codes) out.codes.push_back(remap[static_cast<std::size_t>(c)]);
        columns.push_back(std::move(out));
    }
    return Table(schema, std::move(columns));
}

namespace {

ReconstructionResult reconstruct_aligned(const RfodModel& model, const Table& test, std::size_t threads) {
    const std::size_t m = test.n_rows();
    const std::size_t d = model.n_features();
    ReconstructionResult r;
    r.x_hat = Matrix(m, d);
    r.uncertainty = Matrix(m, d);
    r.proba.resize(d);
    for (std::size_t j = 0; j < d; ++j)
        if (model.forest(j).mode() == TreeMode::Classification) r.proba[j] = Matrix(m, model.forest(j).classes().size());

    const std::size_t blocks = (m + kRowBlock - 1) / kRowBlock;
    parallel_for(d * blocks, threads, [&](std::size_t task) {
        const std::size_t j = task / blocks;
        const std::size_t begin = (task % blocks) * kRowBlock;
        const std::size_t end = std::min(m, begin + kRowBlock);
        const Forest& forest = model.forest(j);
        for (std::size_t i = begin; i < end; ++i) {
            const Aggregate agg = forest.predict(TableRow{&test, i});
            r.x_hat(i, j) = agg.point;
            r.uncertainty(i, j) = agg.uncertainty;
            if (!agg.proba.empty()) std::copy(agg.proba.begin(), agg.proba.end(), r.proba[j].row(i).begin());
        }
    });
    return r;
}

}  // namespace

ReconstructionResult reconstruct(const RfodModel& model, const Table& test, std::size_t threads) {
    return reconstruct_aligned(model, align_to_model(model, test), threads);
}

DetectionResult score_reconstruction(const RfodModel& model, const Table& aligned_test, ReconstructionResult recon,
                                     const ScoringOptions& options) {
    options.validate();
    DetectionResult out;
    out.cell_scores = build_cell_scores(aligned_test, recon, model.profile(), options.alpha, options.distance,
                                        options.score_cap);
    out.weights = confidence_weights(recon.uncertainty);
    out.row_scores = aggregate_rows(out.cell_scores, out.weights, options.aggregation);
    out.reconstruction = std::move(recon);
    return out;
}

DetectionResult detect(const RfodModel& model, const Table& test, const ScoringOptions& options, std::size_t threads) {
    const Table aligned = align_to_model(model, test);
    return score_reconstruction(model, aligned, reconstruct_aligned(model, aligned, threads), options);
}

DetectionResult detect(const RfodModel& model, const Table& test, std::size_t threads) {
    return detect(model, test, model.config().scoring, threads);
}

}  // namespace rfod
