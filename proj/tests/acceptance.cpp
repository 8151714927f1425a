// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "rfod/engine.hpp"
#include "rfod/forest.hpp"
#include "rfod/metrics.hpp"
#include "rfod/persist.hpp"
#include "rfod/scoring.hpp"

#include "oracles.hpp"
#include "synthetic.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>

using namespace rfod;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            detail = what;
        }
    }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

int failures = 0;

void run(int id, const char* name, double limit_seconds, const std::function<Outcome()>& body) {
    const auto start = Clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out.pass = false;
        out.detail = std::string("exception: ") + e.what();
    }
    const double took = seconds_since(start);
    if (out.pass && took >= limit_seconds) {
        out.pass = false;
        out.detail = fmt("runtime %.2f s exceeds %.0f s", took, limit_seconds);
    }
    if (!out.pass) ++failures;
    std::printf("%s  [%d] %s (%.2f s%s%s)\n", out.pass ? "PASS" : "FAIL", id, name, took,
                out.detail.empty() ? "" : "; ", out.detail.c_str());
    std::fflush(stdout);
}

// ---------------------------------------------------------------------------

Outcome categorical_table() {
    Outcome o;
    // observed category A in every row; probabilities over (A, B) or (A, B, C)
    struct Case {
        std::vector<double> proba;
        double expected;
        double hard;
    };
    const std::vector<Case> cases{
        {{0.8, 0.2}, 0.2, 0},      {{0.6, 0.4}, 0.4, 0},      {{0.3, 0.7}, 0.7, 1},
        {{0.5, 0.3, 0.2}, 0.5, 0}, {{0.1, 0.2, 0.7}, 0.9, 1}, {{0.2, 0.7, 0.1}, 0.8, 1},
    };
    for (const auto& c : cases) {
        const std::size_t k = c.proba.size();
        std::vector<std::string> dict{"A", "B", "C"};
        dict.resize(k);
        // column through the full cell-scoring path; the padding rows make the
        // dictionary hold every class
        std::vector<std::string> obs(dict.begin(), dict.end());
        obs[0] = "A";
        auto test = synth::make_table({{"x", synth::numeric(std::vector<double>(k, 0.0))}, {"c", synth::categorical(obs)}});
        ReconstructionResult r;
        r.x_hat = Matrix(k, 2);
        r.uncertainty = Matrix(k, 2);
        r.proba = {Matrix(), Matrix(k, k)};
        for (std::size_t q = 0; q < k; ++q) r.proba[1](0, q) = c.proba[q];
        r.x_hat(0, 1) = static_cast<double>(std::max_element(c.proba.begin(), c.proba.end()) - c.proba.begin());
        QuantileProfile profile(std::vector<std::optional<std::vector<double>>>{std::vector<double>{0.0, 1.0}, std::nullopt});
        const double agd = build_cell_scores(test, r, profile, 0.01, DistanceVariant::AGD)(0, 1);
        const double gd = build_cell_scores(test, r, profile, 0.01, DistanceVariant::GD)(0, 1);
        o.require(std::abs(agd - c.expected) <= 1e-12, fmt("AGD %.17g, expected %.17g", agd, c.expected));
        o.require(gd == c.hard, fmt("hard match %.0f, expected %.0f", gd, c.hard));
    }
    if (o.pass) o.detail = "6/6 rows within 1e-12";
    return o;
}

Outcome limit_identities() {
    Outcome o;
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> len(2, 500), family(0, 3);
    std::normal_distribution<double> g(0.0, 1.0);
    std::exponential_distribution<double> ex(0.5);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    double worst_rel = 0.0;
    for (int col = 0; col < 200; ++col) {
        std::vector<double> v(static_cast<std::size_t>(len(rng)));
        const int fam = family(rng);
        for (auto& x : v) {
            switch (fam) {
                case 0: x = g(rng) * 5.0 + 3.0; break;
                case 1: x = ex(rng); break;
                case 2: x = u(rng); break;
                default: x = std::round(u(rng) / 20.0); break;  // heavy ties
            }
        }
        v[0] = -7.0;
        v[1] = 11.0;  // at least two distinct values
        std::sort(v.begin(), v.end());
        const double agd25 = numeric_scale(v, 0.25, DistanceVariant::AGD);
        const double iqr = numeric_scale(v, 0.25, DistanceVariant::GD_IQR);
        QuantileProfile p(std::vector<std::optional<std::vector<double>>>{v});
        const double x = u(rng), xh = u(rng);
        o.require(agd25 == iqr, fmt("column %.0f: AGD(0.25) scale %.17g != IQR %.17g", col, agd25, iqr));
        o.require(distance_numerical(x, xh, p, 0, 0.25, DistanceVariant::AGD) ==
                      distance_numerical(x, xh, p, 0, 0.25, DistanceVariant::GD_IQR),
                  fmt("column %.0f: AGD(0.25) distance differs from GD_IQR", col));
        const double small = distance_numerical(x, xh, p, 0, 1e-9, DistanceVariant::AGD);
        const double gd = distance_numerical(x, xh, p, 0, 0.01, DistanceVariant::GD);
        const double rel = std::abs(small - gd) / std::abs(gd);
        worst_rel = std::max(worst_rel, rel);
        o.require(rel <= 1e-6, fmt("column %.0f: AGD(1e-9) relative gap %.3g", col, rel));
    }
    if (o.pass) o.detail = fmt("200 columns, worst AGD(1e-9)/GD relative gap %.2g", worst_rel);
    return o;
}

Outcome weight_algebra() {
    Outcome o;
    std::mt19937_64 rng(303);
    std::uniform_int_distribution<int> rows(1, 20), cols(2, 30);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::exponential_distribution<double> ex(1.0);
    double worst = 0.0;
    std::size_t zero_rows = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto m = static_cast<std::size_t>(rows(rng));
        const auto d = static_cast<std::size_t>(cols(rng));
        Matrix u(m, d);
        for (std::size_t i = 0; i < m; ++i) {
            const bool all_zero = coin(rng) < 0.15;
            for (std::size_t j = 0; j < d; ++j)
                u(i, j) = all_zero || coin(rng) < 0.2 ? 0.0 : ex(rng) * std::pow(10.0, coin(rng) * 6 - 3);
        }
        const Matrix w = confidence_weights(u);
        for (std::size_t i = 0; i < m; ++i) {
            double sum = 0.0;
            bool all_zero = true;
            for (std::size_t j = 0; j < d; ++j) {
                sum += w(i, j);
                all_zero = all_zero && u(i, j) == 0.0;
            }
            const double gap = std::abs(sum - static_cast<double>(d - 1));
            worst = std::max(worst, gap);
            o.require(gap <= 1e-9, fmt("row sum %.17g, expected %.0f", sum, static_cast<double>(d - 1)));
            if (all_zero) {
                ++zero_rows;
                for (std::size_t j = 0; j < d; ++j)
                    o.require(w(i, j) == 1.0 - 1.0 / static_cast<double>(d),
                              fmt("all-zero row weight %.17g with d = %.0f", w(i, j), static_cast<double>(d)));
            }
        }
    }
    if (o.pass) o.detail = fmt("worst row-sum gap %.2g, %.0f all-zero rows", worst, static_cast<double>(zero_rows));
    return o;
}

Outcome pruning_contract() {
    Outcome o;
    std::mt19937_64 rng(404);
    std::uniform_int_distribution<int> len(1, 64), level(0, 20);
    std::uniform_real_distribution<double> beta_dist(0.0, 1.0), coin(0.0, 1.0);
    for (int trial = 0; trial < 2000; ++trial) {
        const auto t = static_cast<std::size_t>(len(rng));
        std::vector<double> phi(t);
        std::vector<TreeRecord> trees(t);
        for (std::size_t i = 0; i < t; ++i) {
            phi[i] = coin(rng) < 0.05 ? -std::numeric_limits<double>::infinity() : level(rng) / 20.0;
            TreeNode leaf;
            leaf.n_samples = 1;
            leaf.mean = coin(rng);
            trees[i].tree = Tree(TreeMode::Regression, 0, {leaf});
            trees[i].phi = phi[i];
        }
        double beta = trial % 10 == 0 ? 1.0 : beta_dist(rng);
        if (beta == 0.0) beta = 0.5;
        Forest f(TreeMode::Regression, {}, trees);
        f.apply_pruning(beta);
        const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(beta * static_cast<double>(t))));
        auto expect = oracle::sort_and_take(phi, k);
        std::sort(expect.begin(), expect.end());
        o.require(f.active().size() == k, fmt("t = %.0f, beta = %.17g: kept %.0f", static_cast<double>(t), beta,
                                                static_cast<double>(f.active().size())));
        o.require(f.active() == expect, fmt("t = %.0f, beta = %.17g: retained set differs from oracle",
                                            static_cast<double>(t), beta));
    }

    // beta = 1 against an unpruned forest evaluated tree by tree
    auto table = synth::random_table(300, 3, true, 44);
    RfodConfig cfg;
    cfg.forest.t = 40;
    cfg.beta = 1.0;
    cfg.seed = 4;
    RfodModel model = fit(table, cfg);
    RfodModel halved = model.with_beta(0.5).with_beta(1.0);
    for (std::size_t j = 0; j < model.n_features(); ++j) {
        const Forest& forest = halved.forest(j);
        for (std::size_t i = 0; i < table.n_rows(); ++i) {
            TreePredictions all;
            for (const auto& rec : forest.trees()) {
                if (forest.mode() == TreeMode::Regression) all.values.push_back(rec.tree.predict_value(TableRow{&table, i}));
                else all.probas.push_back(rec.tree.predict_proba(TableRow{&table, i}));
            }
            const Aggregate want = aggregate(all, forest.mode());
            const Aggregate got = forest.predict(TableRow{&table, i});
            o.require(got.point == want.point && got.proba == want.proba && got.uncertainty == want.uncertainty,
                      fmt("beta = 1 prediction differs at row %.0f, feature %.0f", static_cast<double>(i),
                          static_cast<double>(j)));
        }
    }
    o.require(detect(halved, table).row_scores == detect(model, table).row_scores, "beta = 1 row scores differ");
    if (o.pass) o.detail = "2000 random phi vectors; beta = 1 bit-identical on 300 rows x 4 features";
    return o;
}

Outcome metric_oracles() {
    Outcome o;
    std::mt19937_64 rng(505);
    std::uniform_int_distribution<int> len(2, 50), levels(1, 12);
    std::normal_distribution<double> g;
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto m = static_cast<std::size_t>(len(rng));
        const int lv = levels(rng);
        const bool continuous = trial % 3 == 0;
        std::vector<double> s(m);
        std::vector<std::uint8_t> y(m);
        for (std::size_t i = 0; i < m; ++i) {
            s[i] = continuous ? g(rng) : static_cast<double>(rng() % static_cast<unsigned>(lv));
            y[i] = static_cast<std::uint8_t>(rng() % 4 == 0);
        }
        y[rng() % m] = 1;
        std::size_t neg = rng() % m;
        while (y[neg] && std::count(y.begin(), y.end(), 0) == 0) y[neg] = 0;
        if (std::count(y.begin(), y.end(), 0) == 0) y[(neg + 1) % m] = 0, y[neg] = 1;
        const double a = auc_roc(s, y), ao = oracle::pairwise_auc(s, y);
        const double p = auc_pr(s, y), po = oracle::rank_walk_ap(s, y);
        worst = std::max({worst, std::abs(a - ao), std::abs(p - po)});
        o.require(std::abs(a - ao) <= 1e-9, fmt("AUC-ROC %.17g vs oracle %.17g", a, ao));
        o.require(std::abs(p - po) <= 1e-9, fmt("AUC-PR %.17g vs oracle %.17g", p, po));
    }
    if (o.pass) o.detail = fmt("1000 instances, worst gap %.2g", worst);
    return o;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark

struct Benchmark {
    EvalSplit split;
};

Benchmark benchmark() {
    auto data = synth::contextual_benchmark(2000, 100, 7);
    return {split_for_eval(data.table, data.labels, 0.5, 7)};
}

RfodConfig benchmark_config() {
    RfodConfig c;
    c.forest.t = 100;
    c.beta = 0.5;
    c.scoring.alpha = 0.01;
    c.seed = 7;
    return c;
}

Outcome synthetic_benchmark() {
    Outcome o;
    const auto b = benchmark();
    RfodModel model = fit(b.split.train, benchmark_config());
    const auto res = detect(model, b.split.test);
    const double roc = auc_roc(res.row_scores, b.split.test_labels);
    const double pr = auc_pr(res.row_scores, b.split.test_labels);
    const auto base = synth::marginal_zscore(b.split.train, b.split.test);
    const double base_roc = auc_roc(base, b.split.test_labels);
    o.require(roc >= 0.85, fmt("RFOD AUC-ROC %.4f < 0.85", roc));
    o.require(pr >= 0.5, fmt("RFOD AUC-PR %.4f < 0.5", pr));
    o.require(base_roc <= 0.65, fmt("marginal baseline AUC-ROC %.4f > 0.65", base_roc));
    o.detail = fmt("RFOD AUC-ROC %.4f, AUC-PR %.4f; marginal z-score AUC-ROC %.4f", roc, pr, base_roc);
    return o;
}

Outcome ablation_direction() {
    Outcome o;
    const auto b = benchmark();
    const auto& y = b.split.test_labels;
    RfodModel model = fit(b.split.train, benchmark_config());
    const double full = auc_roc(detect(model, b.split.test).row_scores, y);

    const double no_prune = auc_roc(detect(model.with_beta(1.0), b.split.test).row_scores, y);
    ScoringOptions gd = model.config().scoring;
    gd.distance = DistanceVariant::GD;
    const double no_agd = auc_roc(detect(model, b.split.test, gd).row_scores, y);
    ScoringOptions mean = model.config().scoring;
    mean.aggregation = Aggregation::UnweightedMean;
    const double no_uwa = auc_roc(detect(model, b.split.test, mean).row_scores, y);

    o.require(full >= no_prune - 0.02, fmt("full %.4f < w/o pruning %.4f - 0.02", full, no_prune));
    o.require(full >= no_agd - 0.02, fmt("full %.4f < w/o AGD %.4f - 0.02", full, no_agd));
    o.require(full >= no_uwa - 0.02, fmt("full %.4f < w/o UWA %.4f - 0.02", full, no_uwa));
    o.detail = fmt("full %.4f; w/o pruning %.4f, w/o AGD %.4f", full, no_prune, no_agd) + fmt(", w/o UWA %.4f", no_uwa);
    return o;
}

Outcome scalability() {
    Outcome o;
    // nested training sets of n = 2000 and 2n normals, one shared test set
    auto data = synth::contextual_benchmark(5000, 100, 8);
    std::vector<std::size_t> small_rows, large_rows, test_rows;
    for (std::size_t i = 0; i < 5000; ++i) {
        if (i < 2000) small_rows.push_back(i);
        if (i < 4000) large_rows.push_back(i);
        if (i >= 4000) test_rows.push_back(i);
    }
    for (std::size_t i = 5000; i < 5100; ++i) test_rows.push_back(i);
    const Table test = data.table.select_rows(test_rows);
    const double m = static_cast<double>(test_rows.size());

    auto measure = [&](const std::vector<std::size_t>& rows, double& fit_s, double& tps) {
        const Table train = data.table.select_rows(rows);
        fit_s = std::numeric_limits<double>::infinity();
        tps = std::numeric_limits<double>::infinity();
        for (int rep = 0; rep < 3; ++rep) {
            const auto start = Clock::now();
            RfodModel model = fit(train, benchmark_config(), 1);
            fit_s = std::min(fit_s, seconds_since(start));
            const auto score_start = Clock::now();
            auto res = detect(model, test, 1);
            tps = std::min(tps, seconds_since(score_start) / m);
        }
    };
    double fit1 = 0, tps1 = 0, fit2 = 0, tps2 = 0;
    measure(small_rows, fit1, tps1);
    measure(large_rows, fit2, tps2);
    const double factor = fit2 / fit1;
    const double tps_ratio = std::max(tps1, tps2) / std::min(tps1, tps2);
    o.require(factor >= 1.5 && factor <= 3.0, fmt("fit time factor %.3f outside [1.5, 3.0]", factor));
    o.require(tps_ratio < 2.0, fmt("TPS ratio %.3f >= 2", tps_ratio));
    o.detail = fmt("fit %.3f s -> %.3f s (x%.3f)", fit1, fit2, factor) +
               fmt("; TPS %.3g s -> %.3g s (ratio %.3f)", tps1, tps2, tps_ratio);
    return o;
}

Outcome thread_determinism() {
    Outcome o;
    const auto b = benchmark();
    std::string reference;
    for (std::size_t threads : {1, 4, 8}) {
        RfodModel model = fit(b.split.train, benchmark_config(), threads);
        const auto res = detect(model, b.split.test, threads);
        std::ostringstream csv;
        write_row_scores(res.row_scores, csv);
        if (threads == 1) reference = csv.str();
        else o.require(csv.str() == reference, fmt("row_scores.csv differs at %.0f threads", static_cast<double>(threads)));
    }
    o.detail = fmt("row_scores.csv identical at 1, 4, 8 threads (%.0f bytes)", static_cast<double>(reference.size()));
    return o;
}

}  // namespace

int main() {
    run(1, "categorical AGD worked example", 1, categorical_table);
    run(2, "AGD limit identities", 5, limit_identities);
    run(3, "UWA weight algebra", 5, weight_algebra);
    run(4, "pruning contract", 10, pruning_contract);
    run(5, "metric oracles", 30, metric_oracles);
    run(6, "synthetic contextual-anomaly benchmark", 60, synthetic_benchmark);
    run(7, "ablation direction", 180, ablation_direction);
    run(8, "scalability shape", 300, scalability);
    run(9, "thread-count determinism", 120, thread_determinism);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
