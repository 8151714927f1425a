#include "rfod/error.hpp"
#include "rfod/persist.hpp"

#include "doctest.h"
#include "synthetic.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

using namespace rfod;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("rfod_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("model save/load round trip is exact") {
    auto t = synth::random_table(70, 3, true, 3);
    RfodConfig cfg;
    cfg.forest.t = 6;
    cfg.seed = 12;
    cfg.scoring.alpha = 0.05;
    cfg.forest.tree.max_depth = 6;
    RfodModel model = fit(t, cfg);
    auto dir = scratch("model");
    save_model(model, dir);
    CHECK(fs::exists(dir / "manifest.json"));
    CHECK(fs::exists(dir / "quantiles.json"));
    RfodModel loaded = load_model(dir);
    CHECK(loaded.schema() == model.schema());
    CHECK(loaded.config() == model.config());
    CHECK(loaded.profile() == model.profile());
    for (std::size_t j = 0; j < model.n_features(); ++j) {
        CHECK(loaded.forest(j).active() == model.forest(j).active());
        for (std::size_t i = 0; i < model.forest(j).t_total(); ++i) {
            CHECK(loaded.forest(j).trees()[i].tree == model.forest(j).trees()[i].tree);
            CHECK(loaded.forest(j).trees()[i].phi == model.forest(j).trees()[i].phi);
        }
    }
    CHECK(detect(loaded, t).row_scores == detect(model, t).row_scores);
    fs::remove_all(dir);
}

TEST_CASE("unknown model version and missing directory are input errors") {
    auto t = synth::random_table(30, 2, false, 4);
    RfodConfig cfg;
    cfg.forest.t = 2;
    auto dir = scratch("version");
    save_model(fit(t, cfg), dir);
    std::ifstream in(dir / "manifest.json");
    auto j = nlohmann::json::parse(in);
    in.close();
    j["version"] = kModelFormatVersion + 1;
    std::ofstream(dir / "manifest.json") << j.dump();
    CHECK_THROWS_AS(load_model(dir), InputError);
    CHECK_THROWS_AS(load_model(dir / "nope"), InputError);
    fs::remove_all(dir);
}

TEST_CASE("format_double is shortest round-trip") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5, 123456789.125, std::numeric_limits<double>::denorm_min()}) {
        auto s = format_double(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
    CHECK(format_double(0.25) == "0.25");
}

TEST_CASE("cell matrix and row scores round trip through csv") {
    Matrix m(3, 2);
    m(0, 1) = 0.1;
    m(2, 0) = 1.0 / 7.0;
    std::stringstream buf;
    write_cell_matrix(m, buf);
    CHECK(read_cell_matrix(buf) == m);

    std::vector<double> rows{0.5, 1e-9, 3.25};
    std::stringstream rb;
    write_row_scores(rows, rb);
    CHECK(rb.str().rfind("row_id,score\n", 0) == 0);
    CHECK(read_row_scores(rb) == rows);
}

TEST_CASE("heatmap bundle selects rows") {
    Matrix m(3, 2, 0.5);
    std::vector<std::string> names{"a", "b"};
    std::vector<double> rows{1, 2, 3};
    std::vector<std::size_t> pick{2};
    auto j = heatmap_json(names, m, rows, pick);
    CHECK(j["rows"] == nlohmann::json::array({2}));
    CHECK(j["scores"].size() == 1);
    CHECK(j["row_scores"][0] == 3.0);
}
