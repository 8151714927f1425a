#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "json.hpp"

namespace rfod {

/// Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 P(equal), exact with ties.
/// `labels` are 1 for the positive (anomalous) class. Throws LabelError unless
/// both classes are present.
double auc_roc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Step-wise average precision. Equal scores are ordered negatives first
/// (worst case for the positives). Throws LabelError without positives.
double auc_pr(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct ThresholdMetrics {
    double f1 = 0.0;
    double accuracy = 0.0;
    double threshold = 0.0;
    std::size_t flagged = 0;
};

/// Flags the ceil(contamination * m) highest scores (ties by ascending row
/// index); the threshold is the lowest flagged score. F1 is 0 when precision
/// and recall are both 0. Throws ConfigError unless contamination * m >= 1.
ThresholdMetrics threshold_metrics(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                   double contamination);

/// Scores are min-max normalized over the vector and clipped to
/// [1e-7, 1 - 1e-7] before the binary cross-entropy. Constant scores map to
/// 0.5 everywhere.
double log_loss(std::span<const double> scores, std::span<const std::uint8_t> labels);

inline constexpr double kLogLossClip = 1e-7;

struct Timings {
    double fit_total = 0.0;
    double fit_per_feature = 0.0;  // TPF
    double prune = 0.0;
    double score_total = 0.0;
    double score_per_sample = 0.0;  // TPS
};

struct EvalReport {
    double auc_roc = 0.0;
    double auc_pr = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    double log_loss = 0.0;
    double threshold = 0.0;
    double contamination = 0.0;
    Timings timings;
};

/// Computes every metric for one score vector.
EvalReport evaluate(std::span<const double> scores, std::span<const std::uint8_t> labels, double contamination);

/// Timings are wall-clock; leave them out when output must be reproducible.
nlohmann::json to_json(const EvalReport& report, bool include_timings = true);
std::string csv_header();
std::string to_csv_row(const EvalReport& report);

}  // namespace rfod
