// rfod command-line front end: fit, detect, eval, bench, export-heatmap.

#include "rfod/csv.hpp"
#include "rfod/engine.hpp"
#include "rfod/error.hpp"
#include "rfod/metrics.hpp"
#include "rfod/parallel.hpp"
#include "rfod/persist.hpp"
#include "rfod/table.hpp"

#include "run_manifest.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using namespace rfod;
using rfod::cli::RunManifest;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// Shared flags

struct DataFlags {
    std::string schema_path;
    std::vector<std::string> categorical;
    std::string label;
};

struct ModelFlags {
    double alpha = 0.01;
    double beta = 0.5;
    std::size_t trees = 100;
    std::uint64_t seed = 0;
    std::size_t mtry = 0;
    std::size_t max_depth = 0;
    std::size_t min_samples_leaf = 0;
    std::string distance = "agd";
    std::string agg = "uwa";
    double quantile_cap = kDefaultScoreCap;

    CLI::Option* mtry_opt = nullptr;
    CLI::Option* max_depth_opt = nullptr;
    CLI::Option* leaf_opt = nullptr;
};

struct ScoringFlags {
    double alpha = 0.01;
    std::string distance;
    std::string agg;
    double quantile_cap = kDefaultScoreCap;
    CLI::Option* alpha_opt = nullptr;
    CLI::Option* distance_opt = nullptr;
    CLI::Option* agg_opt = nullptr;
    CLI::Option* cap_opt = nullptr;
};

void add_data_flags(CLI::App* app, DataFlags& f) {
    app->add_option("--schema", f.schema_path, "JSON schema (list of {name, kind}); inferred from the CSV if omitted");
    app->add_option("--categorical", f.categorical, "Force these columns categorical (comma separated)")->delimiter(',');
}

void add_model_flags(CLI::App* app, ModelFlags& f) {
    app->add_option("--alpha", f.alpha, "Quantile level for numerical scaling, in (0, 0.5)")->capture_default_str();
    app->add_option("--beta", f.beta, "Share of trees kept after OOB ranking, in (0, 1]")->capture_default_str();
    app->add_option("--trees", f.trees, "Trees per feature forest")->capture_default_str();
    app->add_option("--seed", f.seed, "Seed for every random draw")->capture_default_str();
    f.mtry_opt = app->add_option("--mtry", f.mtry, "Predictors sampled per split (default ceil(sqrt p) / ceil(p/3))");
    f.max_depth_opt = app->add_option("--max-depth", f.max_depth, "Maximum tree depth (default unlimited)");
    f.leaf_opt = app->add_option("--min-samples-leaf", f.min_samples_leaf, "Minimum samples per leaf (default 1 / 5)");
    app->add_option("--distance", f.distance, "Cell distance: agd, gd or gd-iqr")->capture_default_str();
    app->add_option("--agg", f.agg, "Row aggregation: uwa or mean")->capture_default_str();
    app->add_option("--quantile-cap", f.quantile_cap, "Cap for numerical scores on constant features")
        ->capture_default_str();
}

void add_scoring_flags(CLI::App* app, ScoringFlags& f) {
    f.alpha_opt = app->add_option("--alpha", f.alpha, "Override the model's alpha");
    f.distance_opt = app->add_option("--distance", f.distance, "Override the cell distance: agd, gd or gd-iqr");
    f.agg_opt = app->add_option("--agg", f.agg, "Override the row aggregation: uwa or mean");
    f.cap_opt = app->add_option("--quantile-cap", f.quantile_cap, "Override the constant-feature score cap");
}

RfodConfig make_config(const ModelFlags& f) {
    RfodConfig c;
    c.scoring.alpha = f.alpha;
    c.scoring.distance = parse_distance_variant(f.distance);
    c.scoring.aggregation = parse_aggregation(f.agg);
    c.scoring.score_cap = f.quantile_cap;
    c.beta = f.beta;
    c.forest.t = f.trees;
    c.seed = f.seed;
    if (f.mtry_opt->count()) c.forest.tree.mtry = f.mtry;
    if (f.max_depth_opt->count()) c.forest.tree.max_depth = f.max_depth;
    if (f.leaf_opt->count()) {
        c.forest.tree.min_samples_leaf = f.min_samples_leaf;
        c.forest.tree.min_samples_split = 2 * f.min_samples_leaf;
    }
    c.validate();
    return c;
}

ScoringOptions apply_overrides(ScoringOptions s, const ScoringFlags& f) {
    if (f.alpha_opt->count()) s.alpha = f.alpha;
    if (f.distance_opt->count()) s.distance = parse_distance_variant(f.distance);
    if (f.agg_opt->count()) s.aggregation = parse_aggregation(f.agg);
    if (f.cap_opt->count()) s.score_cap = f.quantile_cap;
    s.validate();
    return s;
}

std::vector<std::string> read_header(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    auto records = csv::parse(line);
    if (records.empty()) throw InputError(path.string() + " has no header row");
    return records.front();
}

/// Schema from --schema or inference, with --label split off and
/// --categorical applied.
Schema resolve_schema(const fs::path& csv_path, const DataFlags& f, RunManifest& manifest) {
    Schema schema;
    if (!f.schema_path.empty()) {
        schema = load_schema(f.schema_path);
        manifest.add_input(f.schema_path);
    } else {
        auto inferred = infer_schema(csv_path);
        std::vector<ColumnSpec> specs;
        for (const auto& c : inferred.schema.columns())
            if (c.name != f.label) specs.push_back(c);
        for (const auto& name : inferred.categorical_candidates) {
            if (name == f.label || std::find(f.categorical.begin(), f.categorical.end(), name) != f.categorical.end())
                continue;
            std::cerr << "note: column '" << name
                      << "' holds few distinct integers; pass --categorical " << name << " to treat it as categorical\n";
        }
        schema = Schema(std::move(specs), f.label.empty() ? std::nullopt : std::optional<std::string>(f.label));
    }
    if (!f.label.empty() && schema.label_column() != f.label) {
        std::vector<ColumnSpec> specs;
        for (const auto& c : schema.columns())
            if (c.name != f.label) specs.push_back(c);
        schema = Schema(std::move(specs), f.label);
    }
    return force_categorical(schema, f.categorical);
}

Labels parse_labels(const std::vector<std::string>& raw, const std::string& column) {
    Labels out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        std::string v = raw[i];
        std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (v == "1" || v == "true" || v == "anomaly" || v == "outlier") out.push_back(1);
        else if (v == "0" || v == "false" || v == "normal" || v == "inlier") out.push_back(0);
        else
            throw LabelError("label '" + raw[i] + "' at row " + std::to_string(i + 1) + " of column " + column +
                             " is not 0/1, true/false or normal/anomaly");
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
}

template <typename Fn>
void write_file(const fs::path& path, Fn&& fn) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    fn(out);
}

std::vector<std::size_t> top_rows(const std::vector<double>& scores, std::size_t k) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
    if (k > 0 && k < order.size()) order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

std::vector<std::string> feature_names(const Schema& schema) {
    std::vector<std::string> names;
    for (const auto& c : schema.columns()) names.push_back(c.name);
    return names;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
    std::string train;
    std::string out;
    std::size_t threads = 1;
    DataFlags data;
    ModelFlags model;
};

int cmd_fit(const FitArgs& a, RunManifest& manifest) {
    const RfodConfig config = make_config(a.model);
    const Schema schema = resolve_schema(a.train, a.data, manifest);
    manifest.add_input(a.train);
    const Table train = load_table(a.train, schema);

    FitTimings t;
    RfodModel model = fit(train, config, a.threads, &t);
    save_model(model, a.out);

    for (std::size_t j = 0; j < model.n_features(); ++j)
        std::printf("fit %-24s %.6f s\n", schema[j].name.c_str(), t.per_feature[j]);
    std::printf("time per feature (TPF) %.6f s\nprune %.6f s\nfit total %.6f s\n", t.time_per_feature(), t.prune,
                t.total);

    manifest.config = config_to_json(config);
    manifest.seed = config.seed;
    for (const auto& e : fs::directory_iterator(a.out))
        if (e.path().filename() != "run_manifest.json") manifest.outputs.push_back(e.path().string());
    std::sort(manifest.outputs.begin(), manifest.outputs.end());
    manifest.timings = {{"fit_total", t.total}, {"fit_per_feature", t.time_per_feature()}, {"prune", t.prune},
                        {"per_feature", t.per_feature}};
    manifest.write(fs::path(a.out) / "run_manifest.json");
    return 0;
}

// ---------------------------------------------------------------------------
// detect

struct DetectArgs {
    std::string model;
    std::string test;
    std::string out;
    std::string label;
    std::size_t threads = 1;
    std::size_t heatmap_top = 0;
    bool reconstruction = false;
    ScoringFlags scoring;
};

int cmd_detect(const DetectArgs& a, RunManifest& manifest) {
    const RfodModel model = load_model(a.model);
    manifest.add_input_dir(a.model);
    const ScoringOptions options = apply_overrides(model.config().scoring, a.scoring);

    // a label column in the test file is skipped when named (or known from training)
    const auto header = read_header(a.test);
    std::optional<std::string> label = a.label.empty() ? model.schema().label_column() : std::optional(a.label);
    if (label && std::find(header.begin(), header.end(), *label) == header.end()) {
        if (!a.label.empty()) throw SchemaMismatch("label column '" + a.label + "' missing from " + a.test);
        label.reset();
    }
    const Schema schema(model.schema().columns(), label);
    manifest.add_input(a.test);
    const Table test = load_table(a.test, schema);

    const auto start = Clock::now();
    const DetectionResult res = detect(model, test, options, a.threads);
    const double score_total = seconds_since(start);
    const double tps = test.n_rows() ? score_total / static_cast<double>(test.n_rows()) : 0.0;

    const fs::path out(a.out);
    fs::create_directories(out);
    write_file(out / "cell_scores.csv", [&](std::ostream& o) { write_cell_matrix(res.cell_scores, o); });
    write_file(out / "row_scores.csv", [&](std::ostream& o) { write_row_scores(res.row_scores, o); });
    const auto names = feature_names(model.schema());
    const auto rows = top_rows(res.row_scores, a.heatmap_top);
    write_text(out / "heatmap.json", heatmap_json(names, res.cell_scores, res.row_scores, rows).dump() + "\n");
    manifest.outputs = {(out / "cell_scores.csv").string(), (out / "row_scores.csv").string(),
                        (out / "heatmap.json").string()};
    if (a.reconstruction) {
        write_reconstruction(model, res.reconstruction, out);
        for (const char* f : {"x_hat.csv", "uncertainty.csv", "cat_probabilities.csv"})
            manifest.outputs.push_back((out / f).string());
    }

    std::printf("scored %zu rows in %.6f s (TPS %.3g s)\n", test.n_rows(), score_total, tps);
    auto config = config_to_json(model.config());
    config["scoring_used"] = {{"alpha", options.alpha},
                              {"distance", std::string(to_string(options.distance))},
                              {"aggregation", std::string(to_string(options.aggregation))},
                              {"score_cap", options.score_cap}};
    manifest.config = config;
    manifest.seed = model.config().seed;
    manifest.timings = {{"score_total", score_total}, {"score_per_sample", tps}};
    manifest.write(out / "run_manifest.json");
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string data_path;
    std::string out;
    std::string contamination = "auto";
    std::vector<double> sweep_alpha;
    double train_fraction = 0.5;
    std::size_t threads = 1;
    DataFlags data;
    ModelFlags model;
};

double resolve_contamination(const std::string& text, const Labels& test_labels) {
    if (text == "auto") {
        const auto pos = std::count(test_labels.begin(), test_labels.end(), 1);
        if (pos == 0 || pos == static_cast<std::ptrdiff_t>(test_labels.size()))
            throw LabelError("test split has a single class; metrics need both normal and anomalous rows");
        return static_cast<double>(pos) / static_cast<double>(test_labels.size());
    }
    auto v = parse_real(text);
    if (!v || !(*v > 0.0 && *v < 1.0)) throw ConfigError("contamination must be 'auto' or in (0, 1), got " + text);
    return *v;
}

int cmd_eval(EvalArgs a, RunManifest& manifest) {
    if (a.data.label.empty() && a.data.schema_path.empty()) throw ConfigError("eval needs --label or a schema naming one");
    const RfodConfig config = make_config(a.model);
    Schema schema = resolve_schema(a.data_path, a.data, manifest);
    if (!schema.label_column()) throw ConfigError("eval needs --label or a schema naming one");
    manifest.add_input(a.data_path);
    const LabeledTable lt = load_labeled_table(a.data_path, schema);
    const Labels labels = parse_labels(lt.labels, *schema.label_column());

    const EvalSplit split = split_for_eval(lt.table, labels, a.train_fraction, config.seed);
    const double contamination = resolve_contamination(a.contamination, split.test_labels);

    FitTimings ft;
    const RfodModel model = fit(split.train, config, a.threads, &ft);

    // the sweep reuses one reconstruction; alpha only enters the scoring stage
    auto alphas = a.sweep_alpha;
    if (alphas.empty()) alphas.push_back(config.scoring.alpha);
    const Table aligned = align_to_model(model, split.test);
    const auto recon_start = Clock::now();
    const ReconstructionResult recon = reconstruct(model, aligned, a.threads);
    const double recon_seconds = seconds_since(recon_start);

    std::ostringstream model_bytes;
    for (const auto& f : model.forests()) model_bytes << forest_to_json(f).dump();
    const std::string model_digest = cli::sha256_hex(model_bytes.str());

    nlohmann::json reports = nlohmann::json::array();
    std::string csv = "alpha,auc_roc,auc_pr,f1,accuracy,log_loss,threshold,contamination\n";
    nlohmann::json timing_rows = nlohmann::json::array();
    for (double alpha : alphas) {
        ScoringOptions opts = config.scoring;
        opts.alpha = alpha;
        const auto start = Clock::now();
        const DetectionResult res = score_reconstruction(model, aligned, recon, opts);
        const double score_total = recon_seconds + seconds_since(start);
        EvalReport report = evaluate(res.row_scores, split.test_labels, contamination);
        report.timings = {ft.total, ft.time_per_feature(), ft.prune, score_total,
                          score_total / static_cast<double>(split.test.n_rows())};
        auto j = to_json(report, false);
        j["alpha"] = alpha;
        j["model_digest"] = model_digest;
        reports.push_back(j);
        for (double v : {alpha, report.auc_roc, report.auc_pr, report.f1, report.accuracy, report.log_loss,
                         report.threshold, report.contamination})
            csv += format_double(v) + ",";
        csv.back() = '\n';
        timing_rows.push_back(to_json(report)["timings"]);
        std::printf("alpha %-8s AUC-ROC %.4f  AUC-PR %.4f  F1 %.4f  acc %.4f  log-loss %.4f\n",
                    format_double(alpha).c_str(), report.auc_roc, report.auc_pr, report.f1, report.accuracy,
                    report.log_loss);
    }
    std::printf("fit total %.6f s, TPF %.6f s; test rows %zu, train rows %zu\n", ft.total, ft.time_per_feature(),
                split.test.n_rows(), split.train.n_rows());

    const fs::path out(a.out);
    fs::create_directories(out);
    nlohmann::json report_doc = {{"train_rows", split.train.n_rows()},
                                 {"test_rows", split.test.n_rows()},
                                 {"contamination", contamination},
                                 {"reports", reports}};
    write_text(out / "report.json", report_doc.dump(2) + "\n");
    write_text(out / "report.csv", csv);
    write_text(out / "split.json", split_manifest(split, a.train_fraction, config.seed).dump() + "\n");
    manifest.outputs = {(out / "report.json").string(), (out / "report.csv").string(), (out / "split.json").string()};

    manifest.config = config_to_json(config);
    manifest.config["train_fraction"] = a.train_fraction;
    manifest.config["contamination"] = a.contamination;
    manifest.config["sweep_alpha"] = alphas;
    manifest.seed = config.seed;
    manifest.timings = {{"fit_total", ft.total}, {"fit_per_feature", ft.time_per_feature()}, {"prune", ft.prune},
                        {"reconstruct", recon_seconds}, {"per_alpha", timing_rows}};
    manifest.write(out / "run_manifest.json");
    return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
    std::string data_path;
    std::string out;
    std::vector<double> fractions{0.25, 0.5, 1.0};
    double test_fraction = 0.2;
    std::size_t threads = 1;
    DataFlags data;
    ModelFlags model;
};

int cmd_bench(BenchArgs a, RunManifest& manifest) {
    const RfodConfig config = make_config(a.model);
    if (!(a.test_fraction > 0.0 && a.test_fraction < 1.0)) throw ConfigError("test fraction must be in (0, 1)");
    for (double f : a.fractions)
        if (!(f > 0.0 && f <= 1.0)) throw ConfigError("training fractions must be in (0, 1]");
    const Schema schema = resolve_schema(a.data_path, a.data, manifest);
    manifest.add_input(a.data_path);
    Table table;
    Labels labels;
    if (schema.label_column()) {
        auto lt = load_labeled_table(a.data_path, schema);
        table = std::move(lt.table);
        labels = parse_labels(lt.labels, *schema.label_column());
    } else {
        table = load_table(a.data_path, schema);
        labels.assign(table.n_rows(), 0);
    }
    // fixed test split; training pools are nested prefixes of the shuffled remainder
    const EvalSplit split = split_for_eval(table, labels, 1.0 - a.test_fraction, config.seed);
    std::vector<std::size_t> pool = split.train_row_ids;
    std::mt19937_64 rng(derive_seed(config.seed, 1));
    std::shuffle(pool.begin(), pool.end(), rng);

    std::string csv = "fraction,train_rows,test_rows,fit_total,fit_per_feature,prune,score_total,score_per_sample\n";
    nlohmann::json rows = nlohmann::json::array();
    for (double f : a.fractions) {
        const auto n = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(f * static_cast<double>(pool.size()))));
        std::vector<std::size_t> ids(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(std::min(n, pool.size())));
        std::sort(ids.begin(), ids.end());
        const Table train = table.select_rows(ids);
        FitTimings ft;
        const RfodModel model = fit(train, config, a.threads, &ft);
        const auto start = Clock::now();
        const auto res = detect(model, split.test, a.threads);
        const double score_total = seconds_since(start);
        const double tps = score_total / static_cast<double>(split.test.n_rows());
        csv += format_double(f) + "," + std::to_string(train.n_rows()) + "," + std::to_string(split.test.n_rows()) +
               "," + format_double(ft.total) + "," + format_double(ft.time_per_feature()) + "," +
               format_double(ft.prune) + "," + format_double(score_total) + "," + format_double(tps) + "\n";
        rows.push_back({{"fraction", f}, {"train_rows", train.n_rows()}, {"fit_total", ft.total},
                        {"fit_per_feature", ft.time_per_feature()}, {"prune", ft.prune},
                        {"score_total", score_total}, {"score_per_sample", tps}});
        std::printf("fraction %-6s n=%-7zu fit %.4f s  TPF %.4f s  TPS %.3g s\n", format_double(f).c_str(),
                    train.n_rows(), ft.total, ft.time_per_feature(), tps);
    }
    const fs::path out(a.out);
    fs::create_directories(out);
    write_text(out / "bench.csv", csv);
    manifest.outputs = {(out / "bench.csv").string()};
    manifest.config = config_to_json(config);
    manifest.config["fractions"] = a.fractions;
    manifest.config["test_fraction"] = a.test_fraction;
    manifest.seed = config.seed;
    manifest.timings = rows;
    manifest.write(out / "run_manifest.json");
    return 0;
}

// ---------------------------------------------------------------------------
// export-heatmap

struct HeatmapArgs {
    std::string cells;
    std::string rows;
    std::string model;
    std::string out;
    std::size_t top = 0;
    std::vector<std::size_t> select;
};

int cmd_export_heatmap(const HeatmapArgs& a, RunManifest& manifest) {
    std::ifstream cells_in(a.cells);
    if (!cells_in) throw InputError("cannot open " + a.cells);
    const Matrix cells = read_cell_matrix(cells_in);
    manifest.add_input(a.cells);
    std::ifstream rows_in(a.rows);
    if (!rows_in) throw InputError("cannot open " + a.rows);
    const auto row_scores = read_row_scores(rows_in);
    manifest.add_input(a.rows);
    if (row_scores.size() != cells.rows())
        throw InputError("row scores have " + std::to_string(row_scores.size()) + " rows, cell scores " +
                         std::to_string(cells.rows()));

    std::vector<std::string> names;
    if (!a.model.empty()) {
        const auto model = load_model(a.model);
        manifest.add_input_dir(a.model);
        names = feature_names(model.schema());
        if (names.size() != cells.cols()) throw SchemaMismatch("model feature count differs from the cell matrix");
    } else {
        for (std::size_t j = 0; j < cells.cols(); ++j) names.push_back("f" + std::to_string(j));
    }
    std::vector<std::size_t> rows = a.select;
    for (auto r : rows)
        if (r >= cells.rows()) throw ConfigError("row " + std::to_string(r) + " is out of range");
    if (rows.empty()) rows = top_rows(row_scores, a.top);

    const fs::path out(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_text(out, heatmap_json(names, cells, row_scores, rows).dump() + "\n");
    manifest.outputs = {out.string()};
    manifest.config = {{"top", a.top}, {"rows", a.select}};
    manifest.write(out.string() + ".manifest.json");
    std::printf("wrote %zu rows x %zu features to %s\n", rows.size(), names.size(), out.string().c_str());
    return 0;
}

int exit_code_for(const Error& e) {
    if (dynamic_cast<const SchemaMismatch*>(&e)) return 4;
    if (dynamic_cast<const LabelError*>(&e)) return 5;
    if (dynamic_cast<const ConfigError*>(&e)) return 3;
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Leave-one-feature-out random forest outlier detection for mixed-type tables"};
    app.require_subcommand(1);

    std::size_t threads = 1;
    app.add_option("--threads", threads, "Worker threads (results do not depend on this)")->capture_default_str();

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "Train one forest per feature and save the model");
    fit_cmd->add_option("--train", fit_args.train, "Training CSV with a header row")->required();
    fit_cmd->add_option("--out", fit_args.out, "Model directory")->required();
    fit_cmd->add_option("--label", fit_args.data.label, "Column to ignore (e.g. a label)");
    add_data_flags(fit_cmd, fit_args.data);
    add_model_flags(fit_cmd, fit_args.model);

    DetectArgs det_args;
    auto* det_cmd = app.add_subcommand("detect", "Score a test CSV with a saved model");
    det_cmd->add_option("--model", det_args.model, "Model directory")->required();
    det_cmd->add_option("--test", det_args.test, "Test CSV")->required();
    det_cmd->add_option("--out", det_args.out, "Output directory")->required();
    det_cmd->add_option("--label", det_args.label, "Label column to skip in the test CSV");
    det_cmd->add_option("--heatmap-top", det_args.heatmap_top, "Only put the top K rows in heatmap.json (0 = all)");
    det_cmd->add_flag("--reconstruction", det_args.reconstruction, "Also write x_hat.csv, uncertainty.csv, cat_probabilities.csv");
    add_scoring_flags(det_cmd, det_args.scoring);

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "Split a labeled CSV, fit on normals, score and report metrics");
    eval_cmd->add_option("--data", eval_args.data_path, "Labeled CSV")->required();
    eval_cmd->add_option("--label", eval_args.data.label, "Label column (0/1, true/false or normal/anomaly)");
    eval_cmd->add_option("--out", eval_args.out, "Output directory")->required();
    eval_cmd->add_option("--contamination", eval_args.contamination, "Flagged share, or 'auto' for the test anomaly ratio")
        ->capture_default_str();
    eval_cmd->add_option("--sweep-alpha", eval_args.sweep_alpha, "Score once per alpha, reusing the fitted forests")
        ->delimiter(',');
    eval_cmd->add_option("--train-fraction", eval_args.train_fraction, "Share of normal rows used for training")
        ->capture_default_str();
    add_data_flags(eval_cmd, eval_args.data);
    add_model_flags(eval_cmd, eval_args.model);

    BenchArgs bench_args;
    auto* bench_cmd = app.add_subcommand("bench", "Time fitting and scoring over training-set fractions");
    bench_cmd->add_option("--data", bench_args.data_path, "CSV (labeled or not)")->required();
    bench_cmd->add_option("--label", bench_args.data.label, "Label column; anomalies are kept out of training");
    bench_cmd->add_option("--out", bench_args.out, "Output directory")->required();
    bench_cmd->add_option("--fractions", bench_args.fractions, "Training fractions")->delimiter(',')->capture_default_str();
    bench_cmd->add_option("--test-fraction", bench_args.test_fraction, "Held-out share of normal rows")
        ->capture_default_str();
    add_data_flags(bench_cmd, bench_args.data);
    add_model_flags(bench_cmd, bench_args.model);

    HeatmapArgs heat_args;
    auto* heat_cmd = app.add_subcommand("export-heatmap", "Bundle cell and row scores for plotting");
    heat_cmd->add_option("--cells", heat_args.cells, "cell_scores.csv from detect")->required();
    heat_cmd->add_option("--rows", heat_args.rows, "row_scores.csv from detect")->required();
    heat_cmd->add_option("--model", heat_args.model, "Model directory, for feature names");
    heat_cmd->add_option("--out", heat_args.out, "Output JSON file")->required();
    heat_cmd->add_option("--top", heat_args.top, "Keep the K highest-scoring rows (0 = all)");
    heat_cmd->add_option("--rows-select", heat_args.select, "Explicit row ids")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 3;
    }

    RunManifest manifest;
    manifest.argv.assign(argv, argv + argc);
    try {
        if (threads < 1) throw ConfigError("--threads must be at least 1");
        if (*fit_cmd) {
            manifest.command = "fit";
            fit_args.threads = threads;
            return cmd_fit(fit_args, manifest);
        }
        if (*det_cmd) {
            manifest.command = "detect";
            det_args.threads = threads;
            return cmd_detect(det_args, manifest);
        }
        if (*eval_cmd) {
            manifest.command = "eval";
            eval_args.threads = threads;
            return cmd_eval(eval_args, manifest);
        }
        if (*bench_cmd) {
            manifest.command = "bench";
            bench_args.threads = threads;
            return cmd_bench(bench_args, manifest);
        }
        manifest.command = "export-heatmap";
        return cmd_export_heatmap(heat_args, manifest);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
