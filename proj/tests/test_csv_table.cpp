#include "rfod/csv.hpp"
#include "rfod/error.hpp"
#include "rfod/table.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <random>
#include <sstream>

using namespace rfod;

namespace {

Table read(const std::string& text, const std::optional<Schema>& schema = std::nullopt) {
    std::istringstream in(text);
    return read_table(in, schema);
}

}  // namespace

TEST_CASE("csv parser handles quotes, embedded separators and CRLF") {
    auto rows = csv::parse("a,b\r\n\"x,1\",\"say \"\"hi\"\"\"\r\n\r\n3,\n");
    REQUIRE(rows.size() == 3);
    CHECK(rows[1][0] == "x,1");
    CHECK(rows[1][1] == "say \"hi\"");
    CHECK(rows[2][0] == "3");
    CHECK(rows[2][1] == "");
    CHECK_THROWS_AS(csv::parse("a,\"open\n"), InputError);
    CHECK(csv::escape("plain") == "plain");
    CHECK(csv::escape("a,b") == "\"a,b\"");
}

TEST_CASE("schema inference types columns and reports integer candidates") {
    std::istringstream in("x,c,k\n1.5,red,1\n2,blue,2\n-3,red,1\n");
    auto inf = infer_schema(in);
    CHECK(inf.schema[0].kind == FeatureKind::Numerical);
    CHECK(inf.schema[1].kind == FeatureKind::Categorical);
    CHECK(inf.schema[2].kind == FeatureKind::Numerical);
    REQUIRE(inf.categorical_candidates.size() == 1);
    CHECK(inf.categorical_candidates[0] == "k");

    std::istringstream one("only\n1\n");
    CHECK_THROWS_AS(infer_schema(one), InputError);
}

TEST_CASE("loading reports missing cells with row and column") {
    try {
        read("a,b\n1,2\n3,\n");
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()) == "missing value at row 2, column b");
    }
}

TEST_CASE("explicit schema overrides inference and a missing column is a mismatch") {
    Schema s({{"a", FeatureKind::Numerical}, {"k", FeatureKind::Categorical}});
    auto t = read("k,a\n1,0.5\n2,1.5\n", s);
    CHECK(t.kind(1) == FeatureKind::Categorical);
    CHECK(t.text(0, 1) == "1");
    CHECK(t.value(1, 0) == 1.5);
    CHECK_THROWS_AS(read("a,z\n1,2\n", s), SchemaMismatch);
}

TEST_CASE("schema json round trip with and without label") {
    Schema plain({{"a", FeatureKind::Numerical}, {"b", FeatureKind::Categorical}});
    CHECK(schema_from_json(schema_to_json(plain)) == plain);
    Schema labeled({{"a", FeatureKind::Numerical}, {"b", FeatureKind::Categorical}}, "y");
    CHECK(schema_from_json(schema_to_json(labeled)) == labeled);
    CHECK_THROWS_AS(Schema({{"a", FeatureKind::Numerical}}), InputError);
    CHECK_THROWS_AS(Schema({{"a", FeatureKind::Numerical}, {"a", FeatureKind::Numerical}}), InputError);
}

TEST_CASE("table write/read round trip keeps every double bit-exact") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1e3);
    std::ostringstream text;
    text << "x,y,c\n";
    std::vector<double> xs;
    for (int i = 0; i < 200; ++i) {
        xs.push_back(g(rng) / 7.0);
        text << csv::escape(std::to_string(i)) << ',' << xs.back() << ",v" << (i % 3) << '\n';
    }
    Schema s({{"x", FeatureKind::Numerical}, {"y", FeatureKind::Numerical}, {"c", FeatureKind::Categorical}});
    auto t = read(text.str(), s);
    std::ostringstream out;
    write_table(t, out);
    CHECK(read(out.str(), s) == t);
}

TEST_CASE("labeled loading keeps labels out of the feature table") {
    Schema s({{"a", FeatureKind::Numerical}, {"b", FeatureKind::Numerical}}, "y");
    std::istringstream in("a,y,b\n1,0,2\n3,1,4\n");
    auto lt = read_labeled_table(in, s);
    CHECK(lt.table.n_features() == 2);
    CHECK(lt.labels == std::vector<std::string>{"0", "1"});
}

TEST_CASE("split_for_eval: 10 normals + 2 anomalies at fraction 0.5") {
    std::vector<double> v(12);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
    std::vector<Column> cols(2);
    cols[0].values = v;
    cols[1].values = v;
    Table t(Schema({{"a", FeatureKind::Numerical}, {"b", FeatureKind::Numerical}}), cols);
    Labels labels(12, 0);
    labels[3] = labels[9] = 1;
    auto split = split_for_eval(t, labels, 0.5, 11);
    CHECK(split.train.n_rows() == 5);
    CHECK(split.test.n_rows() == 7);
    CHECK(std::count(split.test_labels.begin(), split.test_labels.end(), 1) == 2);
    for (auto r : split.train_row_ids) CHECK(labels[r] == 0);
    for (auto r : split.train_row_ids)
        CHECK(std::find(split.test_row_ids.begin(), split.test_row_ids.end(), r) == split.test_row_ids.end());
    CHECK(split_for_eval(t, labels, 0.5, 11).train_row_ids == split.train_row_ids);
    CHECK_THROWS_AS(split_for_eval(t, Labels(12, 1), 0.5, 1), LabelError);
}

TEST_CASE("quantile examples") {
    const std::vector<double> four{1, 2, 3, 4};
    CHECK(quantile_sorted(four, 0.5) == 2.5);
    std::vector<double> r(101);
    for (int i = 0; i <= 100; ++i) r[static_cast<std::size_t>(i)] = i;
    CHECK(quantile_sorted(r, 0.1) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(quantile_sorted(r, 0.9) == doctest::Approx(90.0).epsilon(1e-12));
    CHECK_THROWS_AS(quantile_sorted(std::vector<double>{}, 0.5), ConfigError);
    CHECK_THROWS_AS(quantile_sorted(four, 1.5), ConfigError);
}

TEST_CASE("property: quantile matches rank-form oracle, is monotone and bounded") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> len(1, 60);
    std::uniform_real_distribution<double> val(-50.0, 50.0), lvl(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> v(static_cast<std::size_t>(len(rng)));
        for (auto& x : v) x = std::round(val(rng) * 4.0) / 4.0;  // ties on purpose
        std::vector<double> s = v;
        std::sort(s.begin(), s.end());
        double q1 = lvl(rng), q2 = lvl(rng);
        if (q1 > q2) std::swap(q1, q2);
        const double a = quantile_sorted(s, q1);
        const double b = quantile_sorted(s, q2);
        CHECK(a == doctest::Approx(oracle::interpolated_quantile(v, q1)).epsilon(1e-12));
        CHECK(a <= b);
        CHECK(a >= s.front());
        CHECK(b <= s.back());
        CHECK(quantile_sorted(s, 0.0) == s.front());
        CHECK(quantile_sorted(s, 1.0) == s.back());
    }
}
