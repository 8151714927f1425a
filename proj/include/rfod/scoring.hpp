#pragma once

#include "rfod/matrix.hpp"
#include "rfod/reconstruction.hpp"
#include "rfod/table.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace rfod {

enum class DistanceVariant { AGD, GD, GD_IQR };
enum class Aggregation { UWA, UnweightedMean };

std::string_view to_string(DistanceVariant v);
std::string_view to_string(Aggregation a);
DistanceVariant parse_distance_variant(std::string_view text);  // agd | gd | gd-iqr
Aggregation parse_aggregation(std::string_view text);           // uwa | mean

/// Scale denominators below this are floored to it, and the resulting
/// score is capped.
inline constexpr double kScaleFloor = 1e-12;
inline constexpr double kDefaultScoreCap = 1e6;

/// Numerical scale of a sorted training column: Q(1-alpha) - Q(alpha) for AGD,
/// max - min for GD, Q(0.75) - Q(0.25) for GD_IQR.
double numeric_scale(std::span<const double> sorted, double alpha, DistanceVariant variant);

/// |x - x_hat| / scale with the constant-feature fallback applied.
double scaled_distance(double x, double x_hat, double scale, double cap = kDefaultScoreCap);

double distance_numerical(double x, double x_hat, const QuantileProfile& profile, std::size_t feature, double alpha,
                          DistanceVariant variant, double cap = kDefaultScoreCap);

/// 1 - p_true, where p_true is the ensemble probability of the observed category.
double distance_categorical(double p_true);

/// Plain Gower matching: 0 when the predicted class is the observed one, else 1.
double distance_categorical_hard(std::int32_t observed, std::int32_t predicted);

/// Per-cell scores. `test` must use the model's category ids (ids at or past a
/// feature's class count are categories never seen in training; they get
/// p_true = 0).
Matrix build_cell_scores(const Table& test, const ReconstructionResult& recon, const QuantileProfile& profile,
                         double alpha, DistanceVariant variant, double cap = kDefaultScoreCap);

/// W = 1 - row-normalized U. All-zero rows get uniform 1/d before the subtraction.
Matrix confidence_weights(const Matrix& uncertainty);

/// UWA: (1/d) sum_j w_ij s_ij. UnweightedMean ignores W.
std::vector<double> aggregate_rows(const Matrix& scores, const Matrix& weights, Aggregation mode);

}  // namespace rfod
