#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace rfod {

enum class FeatureKind { Numerical, Categorical };

std::string_view to_string(FeatureKind kind);
FeatureKind parse_feature_kind(std::string_view text);

struct ColumnSpec {
    std::string name;
    FeatureKind kind = FeatureKind::Numerical;

    friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

/// Ordered feature columns plus an optional label column that is never a
/// feature. Construction enforces unique names and at least two features.
class Schema {
public:
    Schema() = default;
    explicit Schema(std::vector<ColumnSpec> columns, std::optional<std::string> label_column = std::nullopt);

    std::size_t size() const { return columns_.size(); }
    const ColumnSpec& operator[](std::size_t j) const { return columns_[j]; }
    const std::vector<ColumnSpec>& columns() const { return columns_; }
    const std::optional<std::string>& label_column() const { return label_column_; }

    std::optional<std::size_t> index_of(std::string_view name) const;

    /// Same feature names, order and kinds. The label column is ignored.
    bool same_features(const Schema& other) const { return columns_ == other.columns_; }

    friend bool operator==(const Schema&, const Schema&) = default;

private:
    std::vector<ColumnSpec> columns_;
    std::optional<std::string> label_column_;
};

nlohmann::json schema_to_json(const Schema& schema);
/// Accepts either a bare list of {name, kind} or {"columns": [...], "label_column": name}.
Schema schema_from_json(const nlohmann::json& json);
Schema load_schema(const std::filesystem::path& path);
void save_schema(const Schema& schema, const std::filesystem::path& path);

/// One typed column. Numerical columns fill `values`; categorical columns fill
/// `codes`, each indexing `dictionary`.
struct Column {
    FeatureKind kind = FeatureKind::Numerical;
    std::vector<double> values;
    std::vector<std::int32_t> codes;
    std::vector<std::string> dictionary;

    friend bool operator==(const Column&, const Column&) = default;
};

/// Immutable column-oriented mixed-type table with no missing cells.
class Table {
public:
    Table() = default;
    /// Validates lengths, kinds and dictionary bounds against the schema.
    Table(Schema schema, std::vector<Column> columns);

    const Schema& schema() const { return schema_; }
    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_features() const { return columns_.size(); }

    const Column& column(std::size_t j) const { return columns_[j]; }
    FeatureKind kind(std::size_t j) const { return columns_[j].kind; }

    /// Numerical value, or the category id as a double for categorical columns.
    double value(std::size_t row, std::size_t j) const {
        const Column& c = columns_[j];
        return c.kind == FeatureKind::Numerical ? c.values[row] : static_cast<double>(c.codes[row]);
    }

    /// Cell rendered as text (category name, or shortest round-trip real).
    std::string text(std::size_t row, std::size_t j) const;

    /// Rows in the given order; dictionaries are carried over unchanged.
    Table select_rows(std::span<const std::size_t> rows) const;

    friend bool operator==(const Table&, const Table&) = default;

private:
    Schema schema_;
    std::vector<Column> columns_;
    std::size_t n_rows_ = 0;
};

/// Loads a CSV with a header row. Without a schema every column is inferred
/// (see infer_schema). With a schema the header must list exactly the schema
/// columns, plus the label column if the schema names one; the label column
/// is skipped here (use load_labeled_table to read it).
Table load_table(const std::filesystem::path& path, const std::optional<Schema>& schema = std::nullopt);
Table read_table(std::istream& in, const std::optional<Schema>& schema = std::nullopt);

struct LabeledTable {
    Table table;
    std::vector<std::string> labels;  // raw label text per row
};
LabeledTable load_labeled_table(const std::filesystem::path& path, const Schema& schema);
LabeledTable read_labeled_table(std::istream& in, const Schema& schema);

void write_table(const Table& table, std::ostream& out);
void save_table(const Table& table, const std::filesystem::path& path);

struct SchemaInference {
    Schema schema;
    /// Numerical columns whose values are all integers with few distinct
    /// values. Reported only; inference never reclassifies them.
    std::vector<std::string> categorical_candidates;
};

SchemaInference infer_schema(const std::filesystem::path& path, std::size_t categorical_max_cardinality = 10);
SchemaInference infer_schema(std::istream& in, std::size_t categorical_max_cardinality = 10);

/// Returns a copy of the schema with the named columns forced categorical.
Schema force_categorical(const Schema& schema, std::span<const std::string> names);

/// Parses a cell as a finite real; std::nullopt if it is not one.
std::optional<double> parse_real(std::string_view text);

// ---------------------------------------------------------------------------
// Train/test split

enum class RowLabel : std::uint8_t { Normal = 0, Anomaly = 1 };
using Labels = std::vector<std::uint8_t>;  // 1 = anomaly

struct EvalSplit {
    Table train;
    Table test;
    Labels test_labels;
    std::vector<std::size_t> train_row_ids;
    std::vector<std::size_t> test_row_ids;
};

/// Draws floor(train_fraction * #normals) normal rows for training (seeded,
/// without replacement). The test set is every remaining row, in original order.
EvalSplit split_for_eval(const Table& table, std::span<const std::uint8_t> labels, double train_fraction,
                         std::uint64_t seed);

nlohmann::json split_manifest(const EvalSplit& split, double train_fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Quantiles

/// Linear-interpolation quantile of an ascending-sorted sample.
double quantile_sorted(std::span<const double> sorted, double q);

/// Sorted copies of the numerical training columns.
class QuantileProfile {
public:
    QuantileProfile() = default;
    explicit QuantileProfile(const Table& train);
    /// One entry per feature; std::nullopt for categorical features.
    explicit QuantileProfile(std::vector<std::optional<std::vector<double>>> sorted_columns);

    std::size_t size() const { return columns_.size(); }
    bool is_numerical(std::size_t feature) const { return feature < columns_.size() && columns_[feature]; }
    std::span<const double> sorted(std::size_t feature) const;

    /// Throws ConfigError for q outside [0, 1] or a categorical feature.
    double quantile(std::size_t feature, double q) const;

    const std::vector<std::optional<std::vector<double>>>& columns() const { return columns_; }

    friend bool operator==(const QuantileProfile&, const QuantileProfile&) = default;

private:
    std::vector<std::optional<std::vector<double>>> columns_;
};

}  // namespace rfod
