#pragma once

#include "rfod/forest.hpp"
#include "rfod/matrix.hpp"
#include "rfod/reconstruction.hpp"
#include "rfod/scoring.hpp"
#include "rfod/table.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rfod {

/// Settings that only affect the scoring stage (never training).
struct ScoringOptions {
    double alpha = 0.01;
    DistanceVariant distance = DistanceVariant::AGD;
    Aggregation aggregation = Aggregation::UWA;
    double score_cap = kDefaultScoreCap;

    void validate() const;

    friend bool operator==(const ScoringOptions&, const ScoringOptions&) = default;
};

struct RfodConfig {
    ScoringOptions scoring;
    double beta = 0.5;
    ForestConfig forest;
    std::uint64_t seed = 0;

    /// Throws ConfigError naming the offending setting.
    void validate() const;

    friend bool operator==(const RfodConfig&, const RfodConfig&) = default;
};

/// d feature-specific forests (forest j predicts feature j from the others),
/// frozen training quantiles and category dictionaries. Immutable once built.
class RfodModel {
public:
    RfodModel() = default;
    RfodModel(Schema schema, std::vector<std::vector<std::string>> dictionaries, std::vector<Forest> forests,
              QuantileProfile profile, RfodConfig config);

    const Schema& schema() const { return schema_; }
    std::size_t n_features() const { return schema_.size(); }
    const std::vector<Forest>& forests() const { return forests_; }
    const Forest& forest(std::size_t j) const { return forests_.at(j); }
    const QuantileProfile& profile() const { return profile_; }
    const RfodConfig& config() const { return config_; }
    /// Training category names per feature (empty for numerical features).
    const std::vector<std::vector<std::string>>& dictionaries() const { return dictionaries_; }

    /// Same forests with pruning re-applied at a new retaining ratio.
    RfodModel with_beta(double beta) const;
    /// Same forests with different scoring settings.
    RfodModel with_scoring(const ScoringOptions& scoring) const;

    friend bool operator==(const RfodModel&, const RfodModel&) = default;

private:
    Schema schema_;
    std::vector<std::vector<std::string>> dictionaries_;
    std::vector<Forest> forests_;
    QuantileProfile profile_;
    RfodConfig config_;
};

struct FitTimings {
    double total = 0.0;                // wall clock for the whole fit
    std::vector<double> per_feature;   // summed tree-fitting time per forest
    double prune = 0.0;                // OOB scoring plus ranking
    double time_per_feature() const;
};

/// Leave-one-feature-out training. Tree i of forest j is seeded from
/// (seed, j, i), so the model does not depend on `threads`.
RfodModel fit(const Table& train, const RfodConfig& config, std::size_t threads = 1, FitTimings* timings = nullptr);

/// Re-encodes `test` into the model's category ids. Categories unseen in
/// training get ids past the training dictionary. Throws SchemaMismatch when
/// feature names, order or kinds differ.
Table align_to_model(const RfodModel& model, const Table& test);

/// Runs every active tree of forest j on row i for every cell (i, j).
ReconstructionResult reconstruct(const RfodModel& model, const Table& test, std::size_t threads = 1);

struct DetectionResult {
    ReconstructionResult reconstruction;
    Matrix cell_scores;
    Matrix weights;
    std::vector<double> row_scores;
};

/// Scoring stage on an existing reconstruction; `aligned_test` must come
/// from align_to_model.
DetectionResult score_reconstruction(const RfodModel& model, const Table& aligned_test, ReconstructionResult recon,
                                     const ScoringOptions& options);

/// reconstruct + cell scores + row aggregation with the model's scoring options.
DetectionResult detect(const RfodModel& model, const Table& test, std::size_t threads = 1);
DetectionResult detect(const RfodModel& model, const Table& test, const ScoringOptions& options, std::size_t threads = 1);

}  // namespace rfod
