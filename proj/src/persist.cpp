#include "rfod/persist.hpp"

#include "rfod/csv.hpp"
#include "rfod/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

namespace rfod {

namespace fs = std::filesystem;

namespace {

nlohmann::json optional_json(const std::optional<std::size_t>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<std::size_t> optional_size(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::size_t>();
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void write_json(const nlohmann::json& j, const fs::path& path, int indent = -1) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << j.dump(indent) << '\n';
}

std::string forest_file(std::size_t j) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "forest_%03zu.json", j);
    return buf;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    return out;
}

}  // namespace

nlohmann::json config_to_json(const RfodConfig& c) {
    const auto& tree = c.forest.tree;
    return {{"alpha", c.scoring.alpha},
            {"distance", to_string(c.scoring.distance)},
            {"aggregation", to_string(c.scoring.aggregation)},
            {"score_cap", c.scoring.score_cap},
            {"beta", c.beta},
            {"seed", c.seed},
            {"trees", c.forest.t},
            {"bootstrap_fraction", c.forest.bootstrap_fraction},
            {"mtry", optional_json(tree.mtry)},
            {"max_depth", optional_json(tree.max_depth)},
            {"min_samples_leaf", optional_json(tree.min_samples_leaf)},
            {"min_samples_split", optional_json(tree.min_samples_split)},
            {"max_categorical_partitions", tree.max_categorical_partitions}};
}

RfodConfig config_from_json(const nlohmann::json& j) {
    try {
        RfodConfig c;
        c.scoring.alpha = j.at("alpha").get<double>();
        c.scoring.distance = parse_distance_variant(j.at("distance").get<std::string>());
        c.scoring.aggregation = parse_aggregation(j.at("aggregation").get<std::string>());
        c.scoring.score_cap = j.at("score_cap").get<double>();
        c.beta = j.at("beta").get<double>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.forest.t = j.at("trees").get<std::size_t>();
        c.forest.bootstrap_fraction = j.at("bootstrap_fraction").get<double>();
        c.forest.tree.mtry = optional_size(j, "mtry");
        c.forest.tree.max_depth = optional_size(j, "max_depth");
        c.forest.tree.min_samples_leaf = optional_size(j, "min_samples_leaf");
        c.forest.tree.min_samples_split = optional_size(j, "min_samples_split");
        c.forest.tree.max_categorical_partitions = j.at("max_categorical_partitions").get<std::size_t>();
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed config: ") + e.what());
    }
}

void save_model(const RfodModel& model, const fs::path& dir) {
    fs::create_directories(dir);
    const std::size_t d = model.n_features();
    nlohmann::json files = nlohmann::json::array();
    for (std::size_t j = 0; j < d; ++j) {
        write_json(forest_to_json(model.forest(j)), dir / forest_file(j));
        files.push_back(forest_file(j));
    }
    nlohmann::json quantiles = nlohmann::json::array();
    for (const auto& col : model.profile().columns())
        quantiles.push_back(col ? nlohmann::json(*col) : nlohmann::json(nullptr));
    write_json({{"format", "rfod-quantiles"}, {"version", kModelFormatVersion}, {"sorted_columns", quantiles}},
               dir / "quantiles.json");

    nlohmann::json manifest = {{"format", "rfod-model"},
                               {"version", kModelFormatVersion},
                               {"config", config_to_json(model.config())},
                               {"schema", schema_to_json(model.schema())},
                               {"dictionaries", model.dictionaries()},
                               {"forests", files},
                               {"quantiles", "quantiles.json"}};
    write_json(manifest, dir / "manifest.json", 2);
}

RfodModel load_model(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw InputError("model directory " + dir.string() + " does not exist");
    const auto manifest = read_json(dir / "manifest.json");
    try {
        if (manifest.at("format").get<std::string>() != "rfod-model")
            throw InputError(dir.string() + " is not a model directory");
        const int version = manifest.at("version").get<int>();
        if (version != kModelFormatVersion) throw InputError("unsupported model format version " + std::to_string(version));

        RfodConfig config = config_from_json(manifest.at("config"));
        Schema schema = schema_from_json(manifest.at("schema"));
        auto dictionaries = manifest.at("dictionaries").get<std::vector<std::vector<std::string>>>();

        std::vector<Forest> forests;
        for (const auto& name : manifest.at("forests")) forests.push_back(forest_from_json(read_json(dir / name.get<std::string>())));

        const auto q = read_json(dir / manifest.at("quantiles").get<std::string>());
        if (q.at("format").get<std::string>() != "rfod-quantiles" || q.at("version").get<int>() != kModelFormatVersion)
            throw InputError("unsupported quantile file");
        std::vector<std::optional<std::vector<double>>> cols;
        for (const auto& c : q.at("sorted_columns"))
            cols.push_back(c.is_null() ? std::nullopt : std::optional(c.get<std::vector<double>>()));

        for (auto& f : forests)
            if (f.beta() != config.beta) throw InputError("forest pruning disagrees with the model's beta");
        return RfodModel(std::move(schema), std::move(dictionaries), std::move(forests), QuantileProfile(std::move(cols)),
                         std::move(config));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed model manifest: ") + e.what());
    }
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

void write_cell_matrix(const Matrix& values, std::ostream& out) {
    out << "row_id,column_id,value\n";
    for (std::size_t i = 0; i < values.rows(); ++i)
        for (std::size_t j = 0; j < values.cols(); ++j) out << i << ',' << j << ',' << format_double(values(i, j)) << '\n';
}

void write_row_scores(std::span<const double> scores, std::ostream& out) {
    out << "row_id,score\n";
    for (std::size_t i = 0; i < scores.size(); ++i) out << i << ',' << format_double(scores[i]) << '\n';
}

void write_reconstruction(const RfodModel& model, const ReconstructionResult& recon, const fs::path& dir) {
    fs::create_directories(dir);
    const std::size_t d = model.n_features();
    csv::Record header;
    for (const auto& c : model.schema().columns()) header.push_back(c.name);

    auto x_hat = open_output(dir / "x_hat.csv");
    auto uncertainty = open_output(dir / "uncertainty.csv");
    csv::write_record(x_hat, header);
    csv::write_record(uncertainty, header);
    csv::Record row(d);
    for (std::size_t i = 0; i < recon.rows(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const double v = recon.x_hat(i, j);
            row[j] = model.schema()[j].kind == FeatureKind::Categorical
                         ? model.dictionaries()[j].at(static_cast<std::size_t>(v))
                         : format_double(v);
        }
        csv::write_record(x_hat, row);
        for (std::size_t j = 0; j < d; ++j) row[j] = format_double(recon.uncertainty(i, j));
        csv::write_record(uncertainty, row);
    }

    auto proba = open_output(dir / "cat_probabilities.csv");
    proba << "row_id,feature,category,probability\n";
    for (std::size_t i = 0; i < recon.rows(); ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const Matrix& p = recon.proba[j];
            if (p.cols() == 0) continue;
            for (std::size_t k = 0; k < p.cols(); ++k)
                csv::write_record(proba, {std::to_string(i), model.schema()[j].name, model.dictionaries()[j][k],
                                          format_double(p(i, k))});
        }
}

nlohmann::json heatmap_json(std::span<const std::string> features, const Matrix& cell_scores,
                            std::span<const double> row_scores, std::span<const std::size_t> rows) {
    if (features.size() != cell_scores.cols()) throw ConfigError("feature names do not match the score matrix");
    std::vector<std::size_t> selected(rows.begin(), rows.end());
    if (selected.empty())
        for (std::size_t i = 0; i < cell_scores.rows(); ++i) selected.push_back(i);
    nlohmann::json scores = nlohmann::json::array();
    nlohmann::json row_totals = nlohmann::json::array();
    for (auto i : selected) {
        if (i >= cell_scores.rows()) throw ConfigError("heatmap row " + std::to_string(i) + " out of range");
        auto r = cell_scores.row(i);
        scores.push_back(std::vector<double>(r.begin(), r.end()));
        if (!row_scores.empty()) row_totals.push_back(row_scores[i]);
    }
    nlohmann::json out = {{"features", std::vector<std::string>(features.begin(), features.end())},
                          {"rows", selected},
                          {"scores", scores}};
    if (!row_scores.empty()) out["row_scores"] = row_totals;
    return out;
}

Matrix read_cell_matrix(std::istream& in) {
    const auto records = csv::parse(in);
    if (records.empty() || records.front() != csv::Record{"row_id", "column_id", "value"})
        throw InputError("cell score file must start with row_id,column_id,value");
    std::size_t rows = 0, cols = 0;
    std::vector<std::tuple<std::size_t, std::size_t, double>> cells;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        auto i = parse_real(rec.at(0));
        auto j = parse_real(rec.at(1));
        auto v = parse_real(rec.at(2));
        if (!i || !j || !v || *i < 0 || *j < 0) throw InputError("bad cell score line " + std::to_string(r));
        cells.emplace_back(static_cast<std::size_t>(*i), static_cast<std::size_t>(*j), *v);
        rows = std::max(rows, static_cast<std::size_t>(*i) + 1);
        cols = std::max(cols, static_cast<std::size_t>(*j) + 1);
    }
    if (cells.size() != rows * cols) throw InputError("cell score file is not a complete matrix");
    Matrix m(rows, cols);
    for (const auto& [i, j, v] : cells) m(i, j) = v;
    return m;
}

std::vector<double> read_row_scores(std::istream& in) {
    const auto records = csv::parse(in);
    if (records.empty() || records.front() != csv::Record{"row_id", "score"})
        throw InputError("row score file must start with row_id,score");
    std::vector<double> scores(records.size() - 1);
    for (std::size_t r = 1; r < records.size(); ++r) {
        auto i = parse_real(records[r].at(0));
        auto v = parse_real(records[r].at(1));
        if (!i || !v || *i < 0 || static_cast<std::size_t>(*i) >= scores.size())
            throw InputError("bad row score line " + std::to_string(r));
        scores[static_cast<std::size_t>(*i)] = *v;
    }
    return scores;
}

}  // namespace rfod
