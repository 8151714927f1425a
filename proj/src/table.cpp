#include "rfod/table.hpp"

#include "rfod/csv.hpp"
#include "rfod/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace rfod {

std::string_view to_string(FeatureKind kind) {
    return kind == FeatureKind::Numerical ? "numerical" : "categorical";
}

FeatureKind parse_feature_kind(std::string_view text) {
    if (text == "numerical" || text == "Numerical" || text == "num") return FeatureKind::Numerical;
    if (text == "categorical" || text == "Categorical" || text == "cat") return FeatureKind::Categorical;
    throw InputError("unknown feature kind '" + std::string(text) + "'");
}

Schema::Schema(std::vector<ColumnSpec> columns, std::optional<std::string> label_column)
    : columns_(std::move(columns)), label_column_(std::move(label_column)) {
    std::unordered_set<std::string> seen;
    for (const auto& c : columns_) {
        if (c.name.empty()) throw InputError("empty column name");
        if (!seen.insert(c.name).second) throw InputError("duplicate column name '" + c.name + "'");
    }
    if (label_column_ && seen.count(*label_column_))
        throw InputError("label column '" + *label_column_ + "' is also listed as a feature");
    if (columns_.size() < 2)
        throw InputError("at least 2 feature columns are required, got " + std::to_string(columns_.size()));
}

std::optional<std::size_t> Schema::index_of(std::string_view name) const {
    for (std::size_t j = 0; j < columns_.size(); ++j)
        if (columns_[j].name == name) return j;
    return std::nullopt;
}

nlohmann::json schema_to_json(const Schema& schema) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : schema.columns()) cols.push_back({{"name", c.name}, {"kind", to_string(c.kind)}});
    if (!schema.label_column()) return cols;
    return {{"columns", cols}, {"label_column", *schema.label_column()}};
}

Schema schema_from_json(const nlohmann::json& json) {
    try {
        const nlohmann::json* cols = &json;
        std::optional<std::string> label;
        if (json.is_object()) {
            cols = &json.at("columns");
            if (json.contains("label_column") && !json.at("label_column").is_null())
                label = json.at("label_column").get<std::string>();
        }
        if (!cols->is_array()) throw InputError("schema must be a list of {name, kind}");
        std::vector<ColumnSpec> specs;
        for (const auto& c : *cols) {
            const auto kind = c.at("kind").get<std::string>();
            if (kind == "label") {
                if (label) throw InputError("schema declares more than one label column");
                label = c.at("name").get<std::string>();
                continue;
            }
            specs.push_back({c.at("name").get<std::string>(), parse_feature_kind(kind)});
        }
        return Schema(std::move(specs), std::move(label));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed schema: ") + e.what());
    }
}

Schema load_schema(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open schema file " + path.string());
    try {
        return schema_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError("schema file " + path.string() + ": " + e.what());
    }
}

void save_schema(const Schema& schema, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << schema_to_json(schema).dump(2) << '\n';
}

// ---------------------------------------------------------------------------

Table::Table(Schema schema, std::vector<Column> columns) : schema_(std::move(schema)), columns_(std::move(columns)) {
    if (columns_.size() != schema_.size())
        throw InputError("table has " + std::to_string(columns_.size()) + " columns, schema has " +
                         std::to_string(schema_.size()));
    for (std::size_t j = 0; j < columns_.size(); ++j) {
        const Column& c = columns_[j];
        if (c.kind != schema_[j].kind) throw InputError("column '" + schema_[j].name + "' kind disagrees with schema");
        const std::size_t len = c.kind == FeatureKind::Numerical ? c.values.size() : c.codes.size();
        if (j == 0) n_rows_ = len;
        if (len != n_rows_) throw InputError("column '" + schema_[j].name + "' has inconsistent length");
        if (c.kind == FeatureKind::Numerical) {
            for (double v : c.values)
                if (!std::isfinite(v)) throw InputError("non-finite value in column '" + schema_[j].name + "'");
        } else {
            const auto k = static_cast<std::int32_t>(c.dictionary.size());
            for (auto code : c.codes)
                if (code < 0 || code >= k)
                    throw InputError("category id out of range in column '" + schema_[j].name + "'");
        }
    }
}

namespace {

std::string format_real(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

}  // namespace

std::string Table::text(std::size_t row, std::size_t j) const {
    const Column& c = columns_[j];
    if (c.kind == FeatureKind::Categorical) return c.dictionary[static_cast<std::size_t>(c.codes[row])];
    return format_real(c.values[row]);
}

Table Table::select_rows(std::span<const std::size_t> rows) const {
    std::vector<Column> out;
    out.reserve(columns_.size());
    for (const Column& c : columns_) {
        Column s;
        s.kind = c.kind;
        s.dictionary = c.dictionary;
        if (c.kind == FeatureKind::Numerical) {
            s.values.reserve(rows.size());
            for (auto r : rows) s.values.push_back(c.values.at(r));
        } else {
            s.codes.reserve(rows.size());
            for (auto r : rows) s.codes.push_back(c.codes.at(r));
        }
        out.push_back(std::move(s));
    }
    return Table(schema_, std::move(out));
}

std::optional<double> parse_real(std::string_view text) {
    if (text.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

// ---------------------------------------------------------------------------
// Loading

namespace {

void check_header(const csv::Record& header) {
    std::unordered_set<std::string> seen;
    for (const auto& name : header)
        if (!seen.insert(name).second) throw InputError("duplicate column name '" + name + "' in header");
}

std::vector<csv::Record> read_records(std::istream& in) {
    auto records = csv::parse(in);
    if (records.empty()) throw InputError("empty CSV file");
    check_header(records.front());
    for (std::size_t r = 1; r < records.size(); ++r)
        if (records[r].size() != records.front().size())
            throw InputError("row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                             " fields, header has " + std::to_string(records.front().size()));
    return records;
}

SchemaInference infer_from_records(const std::vector<csv::Record>& records, std::size_t max_cardinality) {
    const auto& header = records.front();
    std::vector<ColumnSpec> specs;
    std::vector<std::string> candidates;
    for (std::size_t j = 0; j < header.size(); ++j) {
        bool numeric = true;
        bool integral = true;
        std::set<double> distinct;
        for (std::size_t r = 1; r < records.size() && numeric; ++r) {
            const auto& cell = records[r][j];
            if (cell.empty()) continue;  // reported as missing at load time
            auto v = parse_real(cell);
            if (!v) {
                numeric = false;
                break;
            }
            if (*v != std::floor(*v)) integral = false;
            if (distinct.size() <= max_cardinality) distinct.insert(*v);
        }
        specs.push_back({header[j], numeric ? FeatureKind::Numerical : FeatureKind::Categorical});
        if (numeric && integral && records.size() > 1 && distinct.size() <= max_cardinality)
            candidates.push_back(header[j]);
    }
    return {Schema(std::move(specs)), std::move(candidates)};
}

LabeledTable build_table(const std::vector<csv::Record>& records, const Schema& schema, bool want_labels) {
    const auto& header = records.front();
    const std::size_t expected = schema.size() + (schema.label_column() ? 1 : 0);
    std::vector<std::size_t> source(schema.size());
    std::optional<std::size_t> label_source;
    for (std::size_t j = 0; j < schema.size(); ++j) {
        auto it = std::find(header.begin(), header.end(), schema[j].name);
        if (it == header.end()) throw SchemaMismatch("column '" + schema[j].name + "' missing from CSV header");
        source[j] = static_cast<std::size_t>(it - header.begin());
    }
    if (schema.label_column()) {
        auto it = std::find(header.begin(), header.end(), *schema.label_column());
        if (it == header.end())
            throw SchemaMismatch("label column '" + *schema.label_column() + "' missing from CSV header");
        label_source = static_cast<std::size_t>(it - header.begin());
    } else if (want_labels) {
        throw ConfigError("schema names no label column");
    }
    if (header.size() != expected) {
        for (const auto& name : header)
            if (!schema.index_of(name) && name != schema.label_column().value_or(""))
                throw SchemaMismatch("CSV column '" + name + "' is not in the schema");
    }

    const std::size_t n = records.size() - 1;
    std::vector<Column> columns(schema.size());
    for (std::size_t j = 0; j < schema.size(); ++j) {
        Column& col = columns[j];
        col.kind = schema[j].kind;
        std::unordered_map<std::string, std::int32_t> ids;
        if (col.kind == FeatureKind::Numerical)
            col.values.reserve(n);
        else
            col.codes.reserve(n);
        for (std::size_t r = 1; r <= n; ++r) {
            const auto& cell = records[r][source[j]];
            if (cell.empty())
                throw InputError("missing value at row " + std::to_string(r) + ", column " + schema[j].name);
            if (col.kind == FeatureKind::Numerical) {
                auto v = parse_real(cell);
                if (!v)
                    throw InputError("unparseable numeric value '" + cell + "' at row " + std::to_string(r) +
                                     ", column " + schema[j].name);
                col.values.push_back(*v);
            } else {
                auto [it, inserted] = ids.try_emplace(cell, static_cast<std::int32_t>(col.dictionary.size()));
                if (inserted) col.dictionary.push_back(cell);
                col.codes.push_back(it->second);
            }
        }
    }
    LabeledTable out{Table(schema, std::move(columns)), {}};
    if (want_labels) {
        out.labels.reserve(n);
        for (std::size_t r = 1; r <= n; ++r) {
            const auto& cell = records[r][*label_source];
            if (cell.empty())
                throw InputError("missing value at row " + std::to_string(r) + ", column " + *schema.label_column());
            out.labels.push_back(cell);
        }
    }
    return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    return in;
}

}  // namespace

Table read_table(std::istream& in, const std::optional<Schema>& schema) {
    const auto records = read_records(in);
    const Schema resolved = schema ? *schema : infer_from_records(records, 0).schema;
    return build_table(records, resolved, false).table;
}

Table load_table(const std::filesystem::path& path, const std::optional<Schema>& schema) {
    auto in = open_input(path);
    return read_table(in, schema);
}

LabeledTable read_labeled_table(std::istream& in, const Schema& schema) {
    return build_table(read_records(in), schema, true);
}

LabeledTable load_labeled_table(const std::filesystem::path& path, const Schema& schema) {
    auto in = open_input(path);
    return read_labeled_table(in, schema);
}

SchemaInference infer_schema(std::istream& in, std::size_t categorical_max_cardinality) {
    const auto records = read_records(in);
    if (records.front().size() < 2) throw InputError("CSV has a single column; at least 2 features are required");
    return infer_from_records(records, categorical_max_cardinality);
}

SchemaInference infer_schema(const std::filesystem::path& path, std::size_t categorical_max_cardinality) {
    auto in = open_input(path);
    return infer_schema(in, categorical_max_cardinality);
}

Schema force_categorical(const Schema& schema, std::span<const std::string> names) {
    auto cols = schema.columns();
    for (const auto& name : names) {
        auto j = schema.index_of(name);
        if (!j) throw ConfigError("cannot force unknown column '" + name + "' categorical");
        cols[*j].kind = FeatureKind::Categorical;
    }
    return Schema(std::move(cols), schema.label_column());
}

void write_table(const Table& table, std::ostream& out) {
    csv::Record row;
    for (const auto& c : table.schema().columns()) row.push_back(c.name);
    csv::write_record(out, row);
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        row.clear();
        for (std::size_t j = 0; j < table.n_features(); ++j) row.push_back(table.text(i, j));
        csv::write_record(out, row);
    }
}

void save_table(const Table& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    write_table(table, out);
}

// ---------------------------------------------------------------------------
// Split

EvalSplit split_for_eval(const Table& table, std::span<const std::uint8_t> labels, double train_fraction,
                         std::uint64_t seed) {
    if (labels.size() != table.n_rows())
        throw InputError("label count " + std::to_string(labels.size()) + " does not match row count " +
                         std::to_string(table.n_rows()));
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must be in (0, 1)");

    std::vector<std::size_t> normals;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == static_cast<std::uint8_t>(RowLabel::Normal)) normals.push_back(i);
    if (normals.empty()) throw LabelError("no normal rows to train on");

    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(normals.size())));
    if (n_train == 0) throw ConfigError("train_fraction leaves the training set empty");
    if (n_train == labels.size()) throw ConfigError("train_fraction leaves the test set empty");

    std::mt19937_64 rng(seed);
    // partial Fisher-Yates: the first n_train entries become the sample
    for (std::size_t i = 0; i < n_train; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, normals.size() - 1);
        std::swap(normals[i], normals[pick(rng)]);
    }
    std::vector<std::size_t> train_ids(normals.begin(), normals.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::sort(train_ids.begin(), train_ids.end());

    std::vector<bool> in_train(labels.size(), false);
    for (auto i : train_ids) in_train[i] = true;
    std::vector<std::size_t> test_ids;
    Labels test_labels;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (in_train[i]) continue;
        test_ids.push_back(i);
        test_labels.push_back(labels[i] ? 1 : 0);
    }

    EvalSplit split;
    split.train = table.select_rows(train_ids);
    split.test = table.select_rows(test_ids);
    split.test_labels = std::move(test_labels);
    split.train_row_ids = std::move(train_ids);
    split.test_row_ids = std::move(test_ids);
    return split;
}

nlohmann::json split_manifest(const EvalSplit& split, double train_fraction, std::uint64_t seed) {
    return {{"seed", seed},
            {"train_fraction", train_fraction},
            {"train_row_ids", split.train_row_ids},
            {"test_row_ids", split.test_row_ids}};
}

// ---------------------------------------------------------------------------
// Quantiles

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw ConfigError("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("quantile level must be in [0, 1]");
    const double h = static_cast<double>(sorted.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

QuantileProfile::QuantileProfile(const Table& train) {
    columns_.resize(train.n_features());
    for (std::size_t j = 0; j < train.n_features(); ++j) {
        if (train.kind(j) != FeatureKind::Numerical) continue;
        std::vector<double> v = train.column(j).values;
        if (v.empty()) throw ConfigError("quantile profile needs a non-empty training column");
        std::sort(v.begin(), v.end());
        columns_[j] = std::move(v);
    }
}

QuantileProfile::QuantileProfile(std::vector<std::optional<std::vector<double>>> sorted_columns)
    : columns_(std::move(sorted_columns)) {
    for (auto& c : columns_) {
        if (!c) continue;
        if (c->empty()) throw InputError("quantile profile column is empty");
        if (!std::is_sorted(c->begin(), c->end())) std::sort(c->begin(), c->end());
    }
}

std::span<const double> QuantileProfile::sorted(std::size_t feature) const {
    if (!is_numerical(feature)) throw ConfigError("feature " + std::to_string(feature) + " is not numerical");
    return *columns_[feature];
}

double QuantileProfile::quantile(std::size_t feature, double q) const {
    return quantile_sorted(sorted(feature), q);
}

}  // namespace rfod
