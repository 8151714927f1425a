#include "rfod/metrics.hpp"

#include "rfod/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

namespace rfod {

namespace {

void check_lengths(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size())
        throw ConfigError("scores and labels differ in length (" + std::to_string(scores.size()) + " vs " +
                          std::to_string(labels.size()) + ")");
}

std::size_t count_positives(std::span<const std::uint8_t> labels) {
    return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](auto y) { return y != 0; }));
}

}  // namespace

double auc_roc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_lengths(scores, labels);
    const std::size_t n_pos = count_positives(labels);
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw LabelError("AUC-ROC needs both normal and anomalous labels");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

    // sum of mid-ranks (1-based) of the positives
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]]) rank_sum += mid_rank;
        i = j;
    }
    const double p = static_cast<double>(n_pos);
    const double u = rank_sum - p * (p + 1.0) / 2.0;
    return u / (p * static_cast<double>(n_neg));
}

double auc_pr(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_lengths(scores, labels);
    const std::size_t n_pos = count_positives(labels);
    if (n_pos == 0) throw LabelError("AUC-PR needs at least one anomalous label");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return labels[a] < labels[b];
    });
    double ap = 0.0;
    std::size_t tp = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (!labels[order[r]]) continue;
        ++tp;
        ap += static_cast<double>(tp) / static_cast<double>(r + 1);
    }
    return ap / static_cast<double>(n_pos);
}

ThresholdMetrics threshold_metrics(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                   double contamination) {
    check_lengths(scores, labels);
    if (!(contamination > 0.0 && contamination < 1.0)) throw ConfigError("contamination must be in (0, 1)");
    const double expected = contamination * static_cast<double>(scores.size());
    // absorb representation error such as 0.1 * 30 = 3.0000000000000004
    const double slack = 1e-9 * std::max(1.0, expected);
    if (expected < 1.0 - slack) throw ConfigError("contamination * m must be at least 1");
    const auto k = static_cast<std::size_t>(std::ceil(expected - slack));

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

    std::size_t tp = 0, fp = 0;
    for (std::size_t r = 0; r < k; ++r) (labels[order[r]] ? tp : fp) += 1;
    const std::size_t positives = count_positives(labels);
    const std::size_t fn = positives - tp;
    const std::size_t tn = scores.size() - tp - fp - fn;

    ThresholdMetrics m;
    m.flagged = k;
    m.threshold = scores[order[k - 1]];
    const double precision = static_cast<double>(tp) / static_cast<double>(k);
    const double recall = positives ? static_cast<double>(tp) / static_cast<double>(positives) : 0.0;
    m.f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(scores.size());
    return m;
}

double log_loss(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_lengths(scores, labels);
    const std::size_t n_pos = count_positives(labels);
    if (n_pos == 0 || n_pos == labels.size()) throw LabelError("log-loss needs both normal and anomalous labels");
    const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
    const double lo = *lo_it;
    const double range = *hi_it - lo;
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        double p = range > 0.0 ? (scores[i] - lo) / range : 0.5;
        p = std::clamp(p, kLogLossClip, 1.0 - kLogLossClip);
        total += labels[i] ? std::log(p) : std::log1p(-p);
    }
    return -total / static_cast<double>(scores.size());
}

EvalReport evaluate(std::span<const double> scores, std::span<const std::uint8_t> labels, double contamination) {
    EvalReport r;
    r.auc_roc = auc_roc(scores, labels);
    r.auc_pr = auc_pr(scores, labels);
    const auto t = threshold_metrics(scores, labels, contamination);
    r.f1 = t.f1;
    r.accuracy = t.accuracy;
    r.threshold = t.threshold;
    r.log_loss = log_loss(scores, labels);
    r.contamination = contamination;
    return r;
}

nlohmann::json to_json(const EvalReport& report, bool include_timings) {
    nlohmann::json j = {{"auc_roc", report.auc_roc},   {"auc_pr", report.auc_pr},
                        {"f1", report.f1},             {"accuracy", report.accuracy},
                        {"log_loss", report.log_loss}, {"threshold", report.threshold},
                        {"contamination", report.contamination}};
    if (include_timings) {
        const auto& t = report.timings;
        j["timings"] = {{"fit_total", t.fit_total},
                        {"fit_per_feature", t.fit_per_feature},
                        {"prune", t.prune},
                        {"score_total", t.score_total},
                        {"score_per_sample", t.score_per_sample}};
    }
    return j;
}

std::string csv_header() {
    return "auc_roc,auc_pr,f1,accuracy,log_loss,threshold,contamination,fit_total,fit_per_feature,prune,score_total,"
           "score_per_sample";
}

std::string to_csv_row(const EvalReport& r) {
    std::ostringstream out;
    out.precision(17);
    const auto& t = r.timings;
    out << r.auc_roc << ',' << r.auc_pr << ',' << r.f1 << ',' << r.accuracy << ',' << r.log_loss << ','
        << r.threshold << ',' << r.contamination << ',' << t.fit_total << ',' << t.fit_per_feature << ','
        << t.prune << ',' << t.score_total << ',' << t.score_per_sample;
    return out.str();
}

}  // namespace rfod
