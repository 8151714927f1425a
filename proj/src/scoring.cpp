#include "rfod/scoring.hpp"

#include "rfod/error.hpp"

#include <algorithm>
#include <cmath>

namespace rfod {

std::string_view to_string(DistanceVariant v) {
    switch (v) {
        case DistanceVariant::AGD: return "agd";
        case DistanceVariant::GD: return "gd";
        case DistanceVariant::GD_IQR: return "gd-iqr";
    }
    return "agd";
}

std::string_view to_string(Aggregation a) {
    return a == Aggregation::UWA ? "uwa" : "mean";
}

DistanceVariant parse_distance_variant(std::string_view text) {
    if (text == "agd") return DistanceVariant::AGD;
    if (text == "gd") return DistanceVariant::GD;
    if (text == "gd-iqr" || text == "gd_iqr") return DistanceVariant::GD_IQR;
    throw ConfigError("distance must be one of agd, gd, gd-iqr (got '" + std::string(text) + "')");
}

Aggregation parse_aggregation(std::string_view text) {
    if (text == "uwa") return Aggregation::UWA;
    if (text == "mean") return Aggregation::UnweightedMean;
    throw ConfigError("aggregation must be uwa or mean (got '" + std::string(text) + "')");
}

double numeric_scale(std::span<const double> sorted, double alpha, DistanceVariant variant) {
    switch (variant) {
        case DistanceVariant::GD: return sorted.back() - sorted.front();
        case DistanceVariant::GD_IQR: return quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
        case DistanceVariant::AGD:
            if (!(alpha > 0.0 && alpha < 0.5)) throw ConfigError("alpha must be in (0, 0.5)");
            return quantile_sorted(sorted, 1.0 - alpha) - quantile_sorted(sorted, alpha);
    }
    return 0.0;
}

double scaled_distance(double x, double x_hat, double scale, double cap) {
    if (!std::isfinite(x) || !std::isfinite(x_hat) || !std::isfinite(scale))
        throw InputError("numerical distance needs finite inputs");
    const double diff = std::abs(x - x_hat);
    if (scale < kScaleFloor) return std::min(diff / kScaleFloor, cap);
    return diff / scale;
}

double distance_numerical(double x, double x_hat, const QuantileProfile& profile, std::size_t feature, double alpha,
                          DistanceVariant variant, double cap) {
    return scaled_distance(x, x_hat, numeric_scale(profile.sorted(feature), alpha, variant), cap);
}

double distance_categorical(double p_true) {
    if (!(p_true >= 0.0 && p_true <= 1.0)) throw InputError("category probability must be in [0, 1]");
    return 1.0 - p_true;
}

double distance_categorical_hard(std::int32_t observed, std::int32_t predicted) {
    return observed == predicted ? 0.0 : 1.0;
}

Matrix build_cell_scores(const Table& test, const ReconstructionResult& recon, const QuantileProfile& profile,
                         double alpha, DistanceVariant variant, double cap) {
    const std::size_t m = test.n_rows();
    const std::size_t d = test.n_features();
    if (recon.rows() != m || recon.cols() != d || profile.size() != d)
        throw ConfigError("cell scoring inputs disagree in shape");

    Matrix scores(m, d);
    for (std::size_t j = 0; j < d; ++j) {
        if (test.kind(j) == FeatureKind::Numerical) {
            const double scale = numeric_scale(profile.sorted(j), alpha, variant);
            const auto& x = test.column(j).values;
            for (std::size_t i = 0; i < m; ++i) scores(i, j) = scaled_distance(x[i], recon.x_hat(i, j), scale, cap);
            continue;
        }
        const auto& codes = test.column(j).codes;
        const Matrix& proba = recon.proba.at(j);
        for (std::size_t i = 0; i < m; ++i) {
            const auto observed = codes[i];
            if (variant == DistanceVariant::AGD) {
                const bool seen = observed >= 0 && static_cast<std::size_t>(observed) < proba.cols();
                const double p_true = seen ? proba(i, static_cast<std::size_t>(observed)) : 0.0;
                scores(i, j) = distance_categorical(std::clamp(p_true, 0.0, 1.0));
            } else {
                scores(i, j) = distance_categorical_hard(observed, static_cast<std::int32_t>(recon.x_hat(i, j)));
            }
        }
    }
    return scores;
}

Matrix confidence_weights(const Matrix& uncertainty) {
    const std::size_t m = uncertainty.rows();
    const std::size_t d = uncertainty.cols();
    Matrix w(m, d);
    for (std::size_t i = 0; i < m; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double u = uncertainty(i, j);
            if (!(u >= 0.0) || !std::isfinite(u)) throw InputError("uncertainty must be finite and nonnegative");
            total += u;
        }
        for (std::size_t j = 0; j < d; ++j) {
            const double share = total > 0.0 ? uncertainty(i, j) / total : 1.0 / static_cast<double>(d);
            w(i, j) = 1.0 - share;
        }
    }
    return w;
}

std::vector<double> aggregate_rows(const Matrix& scores, const Matrix& weights, Aggregation mode) {
    if (mode == Aggregation::UWA && !scores.same_shape(weights))
        throw ConfigError("score and weight matrices differ in shape");
    const std::size_t d = scores.cols();
    std::vector<double> rows(scores.rows(), 0.0);
    if (d == 0) return rows;
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < d; ++j)
            total += mode == Aggregation::UWA ? weights(i, j) * scores(i, j) : scores(i, j);
        rows[i] = total / static_cast<double>(d);
    }
    return rows;
}

}  // namespace rfod
