#include "rfod/error.hpp"
#include "rfod/scoring.hpp"

#include "doctest.h"
#include "oracles.hpp"
#include "synthetic.hpp"

#include <random>

using namespace rfod;

namespace {

QuantileProfile profile_of(std::vector<double> col) {
    std::sort(col.begin(), col.end());
    return QuantileProfile(std::vector<std::optional<std::vector<double>>>{col});
}

std::vector<double> zero_to(int n) {
    std::vector<double> v;
    for (int i = 0; i <= n; ++i) v.push_back(i);
    return v;
}

// Reconstruction where every numerical cell is reproduced and every
// categorical cell gets the given probabilities.
ReconstructionResult recon_for(const Table& t) {
    ReconstructionResult r;
    r.x_hat = Matrix(t.n_rows(), t.n_features());
    r.uncertainty = Matrix(t.n_rows(), t.n_features());
    r.proba.resize(t.n_features());
    for (std::size_t j = 0; j < t.n_features(); ++j) {
        if (t.kind(j) == FeatureKind::Categorical) r.proba[j] = Matrix(t.n_rows(), t.column(j).dictionary.size());
        for (std::size_t i = 0; i < t.n_rows(); ++i) r.x_hat(i, j) = t.value(i, j);
    }
    return r;
}

}  // namespace

TEST_CASE("numerical distance on 0..100 with alpha 0.1 is 50 / 80") {
    auto p = profile_of(zero_to(100));
    CHECK(distance_numerical(0, 50, p, 0, 0.1, DistanceVariant::AGD) == doctest::Approx(0.625).epsilon(1e-14));
    CHECK(distance_numerical(0, 50, p, 0, 0.1, DistanceVariant::GD) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(distance_numerical(0, 50, p, 0, 0.1, DistanceVariant::GD_IQR) == doctest::Approx(1.0).epsilon(1e-14));
    for (auto v : {DistanceVariant::AGD, DistanceVariant::GD, DistanceVariant::GD_IQR})
        CHECK(distance_numerical(3.5, 3.5, p, 0, 0.1, v) == 0.0);
}

TEST_CASE("constant training column floors the scale and caps the score") {
    auto p = profile_of({4, 4, 4, 4});
    CHECK(distance_numerical(4, 5, p, 0, 0.01, DistanceVariant::AGD) == kDefaultScoreCap);
    CHECK(distance_numerical(4, 4, p, 0, 0.01, DistanceVariant::GD) == 0.0);
    CHECK(distance_numerical(4, 5, p, 0, 0.01, DistanceVariant::GD, 50.0) == 50.0);
    CHECK(scaled_distance(0.0, 1e-14, 0.0) == doctest::Approx(0.01));
}

TEST_CASE("alpha outside (0, 0.5) is rejected for AGD") {
    auto p = profile_of(zero_to(10));
    CHECK_THROWS_AS(distance_numerical(0, 1, p, 0, 0.5, DistanceVariant::AGD), ConfigError);
    CHECK_THROWS_AS(distance_numerical(0, 1, p, 0, 0.0, DistanceVariant::AGD), ConfigError);
    CHECK_NOTHROW(distance_numerical(0, 1, p, 0, 0.5, DistanceVariant::GD));
}

TEST_CASE("categorical distance reproduces the worked example table") {
    // observed category A throughout; columns: p_A, argmax, AGD, hard GD
    struct Row {
        std::vector<double> proba;
        double agd;
        double gd;
    };
    const std::vector<Row> rows{
        {{0.8, 0.2}, 0.2, 0}, {{0.6, 0.4}, 0.4, 0}, {{0.3, 0.7}, 0.7, 1},
        {{0.5, 0.3, 0.2}, 0.5, 0}, {{0.1, 0.2, 0.7}, 0.9, 1}, {{0.2, 0.7, 0.1}, 0.8, 1},
    };
    for (const auto& row : rows) {
        CHECK(distance_categorical(row.proba[0]) == doctest::Approx(row.agd).epsilon(1e-12));
        const auto argmax = static_cast<std::int32_t>(std::max_element(row.proba.begin(), row.proba.end()) - row.proba.begin());
        CHECK(distance_categorical_hard(0, argmax) == row.gd);
    }
    CHECK_THROWS_AS(distance_categorical(1.2), InputError);
}

TEST_CASE("mixed 2x2 cell scores match hand arithmetic") {
    // training x = 0..100 (alpha 0.1 scale 80); category dictionary {A, B}
    auto train = synth::make_table({{"x", synth::numeric(zero_to(100))},
                                    {"c", synth::categorical(std::vector<std::string>(101, "A"))}});
    auto test = synth::make_table({{"x", synth::numeric({20, 95})}, {"c", synth::categorical({"A", "A"})}});
    QuantileProfile profile(train);
    auto r = recon_for(test);
    r.x_hat(0, 0) = 60;  // |20 - 60| / 80 = 0.5
    r.x_hat(1, 0) = 15;  // |95 - 15| / 80 = 1.0
    r.proba[1] = Matrix(2, 1);
    r.proba[1](0, 0) = 0.75;  // 0.25
    r.proba[1](1, 0) = 0.0;   // 1.0
    auto s = build_cell_scores(test, r, profile, 0.1, DistanceVariant::AGD);
    CHECK(s(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(s(1, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(s(0, 1) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(s(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("categories unseen in training score 1") {
    auto test = synth::make_table({{"x", synth::numeric({1.0})}, {"c", synth::categorical({"Z"})}});
    auto r = recon_for(test);
    r.proba[1] = Matrix(1, 0);  // training dictionary was empty of Z; observed id 0 is past it
    QuantileProfile profile(std::vector<std::optional<std::vector<double>>>{std::vector<double>{0, 2}, std::nullopt});
    auto s = build_cell_scores(test, r, profile, 0.1, DistanceVariant::AGD);
    CHECK(s(0, 1) == 1.0);
}

TEST_CASE("exact reconstruction with full categorical confidence scores zero") {
    auto t = synth::random_table(30, 3, true, 12);
    auto r = recon_for(t);
    for (std::size_t i = 0; i < t.n_rows(); ++i) r.proba[3](i, static_cast<std::size_t>(t.column(3).codes[i])) = 1.0;
    auto s = build_cell_scores(t, r, QuantileProfile(t), 0.05, DistanceVariant::AGD);
    CHECK(s == Matrix(t.n_rows(), t.n_features()));
}

TEST_CASE("perturbing one numerical cell only changes that cell") {
    auto t = synth::random_table(20, 3, true, 13);
    auto r = recon_for(t);
    for (std::size_t i = 0; i < t.n_rows(); ++i) r.proba[3](i, 0) = 0.4;
    QuantileProfile p(t);
    auto before = build_cell_scores(t, r, p, 0.05, DistanceVariant::AGD);
    r.x_hat(7, 1) += 0.3;
    auto after = build_cell_scores(t, r, p, 0.05, DistanceVariant::AGD);
    for (std::size_t i = 0; i < t.n_rows(); ++i)
        for (std::size_t j = 0; j < t.n_features(); ++j)
            if (i != 7 || j != 1) CHECK(after(i, j) == before(i, j));
    CHECK(after(7, 1) > before(7, 1));
}

TEST_CASE("confidence weights examples") {
    Matrix u(2, 2);
    u(0, 0) = 1;
    u(0, 1) = 3;
    auto w = confidence_weights(u);
    CHECK(w(0, 0) == 0.75);
    CHECK(w(0, 1) == 0.25);
    CHECK(w(1, 0) == 0.5);
    CHECK(w(1, 1) == 0.5);

    Matrix zero(1, 4);
    auto wz = confidence_weights(zero);
    for (std::size_t j = 0; j < 4; ++j) CHECK(wz(0, j) == 0.75);

    Matrix neg(1, 2);
    neg(0, 0) = -1;
    CHECK_THROWS_AS(confidence_weights(neg), InputError);
}

TEST_CASE("row aggregation examples") {
    Matrix s(1, 2), w(1, 2);
    s(0, 0) = 0.4;
    s(0, 1) = 0.8;
    w(0, 0) = 0.75;
    w(0, 1) = 0.25;
    CHECK(aggregate_rows(s, w, Aggregation::UWA)[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(aggregate_rows(s, w, Aggregation::UnweightedMean)[0] == doctest::Approx(0.6).epsilon(1e-15));
    Matrix z(3, 2);
    CHECK(aggregate_rows(z, w, Aggregation::UnweightedMean) == std::vector<double>(3, 0.0));
    CHECK_THROWS_AS(aggregate_rows(z, w, Aggregation::UWA), ConfigError);
}

TEST_CASE("property: weight rows sum to d - 1 and uniform uncertainty scales the mean") {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<int> dims(2, 12);
    std::uniform_real_distribution<double> u(0.0, 2.0), coin(0.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        const auto d = static_cast<std::size_t>(dims(rng));
        Matrix unc(5, d), s(5, d);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                unc(i, j) = coin(rng) < 0.3 ? 0.0 : u(rng);
                s(i, j) = u(rng);
            }
        for (std::size_t j = 0; j < d; ++j) unc(4, j) = 0.0;
        auto w = confidence_weights(unc);
        for (std::size_t i = 0; i < 5; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                sum += w(i, j);
                CHECK(w(i, j) <= 1.0);
                CHECK(w(i, j) >= 0.0);
            }
            CHECK(sum == doctest::Approx(static_cast<double>(d) - 1.0).epsilon(1e-12));
        }
        const auto uwa = aggregate_rows(s, w, Aggregation::UWA);
        const auto mean = aggregate_rows(s, w, Aggregation::UnweightedMean);
        CHECK(uwa[4] == doctest::Approx((1.0 - 1.0 / static_cast<double>(d)) * mean[4]).epsilon(1e-12));

        // monotone in S with W fixed
        Matrix bumped = s;
        const auto j = static_cast<std::size_t>(rng() % d);
        bumped(2, j) += 0.5;
        CHECK(aggregate_rows(bumped, w, Aggregation::UWA)[2] >= uwa[2]);
    }
}

TEST_CASE("property: AGD at alpha 0.25 equals GD_IQR, small alpha approaches GD, shifts and swaps are invariant") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> len(2, 80);
    std::normal_distribution<double> g(0.0, 3.0);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> col(static_cast<std::size_t>(len(rng)));
        for (auto& v : col) v = g(rng);
        auto p = profile_of(col);
        const double x = g(rng), xh = g(rng);
        CHECK(distance_numerical(x, xh, p, 0, 0.25, DistanceVariant::AGD) ==
              distance_numerical(x, xh, p, 0, 0.25, DistanceVariant::GD_IQR));
        const double gd = distance_numerical(x, xh, p, 0, 0.1, DistanceVariant::GD);
        CHECK(distance_numerical(x, xh, p, 0, 1e-9, DistanceVariant::AGD) == doctest::Approx(gd).epsilon(1e-6));
        CHECK(distance_numerical(x, xh, p, 0, 0.05, DistanceVariant::AGD) ==
              distance_numerical(xh, x, p, 0, 0.05, DistanceVariant::AGD));
        std::vector<double> shifted = col;
        for (auto& v : shifted) v += 2.5;
        CHECK(distance_numerical(x + 2.5, xh + 2.5, profile_of(shifted), 0, 0.05, DistanceVariant::AGD) ==
              doctest::Approx(distance_numerical(x, xh, p, 0, 0.05, DistanceVariant::AGD)).epsilon(1e-9));
    }
}

TEST_CASE("variant and aggregation names parse") {
    CHECK(parse_distance_variant("agd") == DistanceVariant::AGD);
    CHECK(parse_distance_variant("gd-iqr") == DistanceVariant::GD_IQR);
    CHECK(parse_aggregation("mean") == Aggregation::UnweightedMean);
    CHECK_THROWS_AS(parse_distance_variant("l2"), ConfigError);
    CHECK(to_string(DistanceVariant::GD) == "gd");
}
