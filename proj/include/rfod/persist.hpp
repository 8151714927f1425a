#pragma once

#include "rfod/engine.hpp"
#include "rfod/matrix.hpp"
#include "rfod/table.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace rfod {

inline constexpr int kModelFormatVersion = 1;

nlohmann::json config_to_json(const RfodConfig& config);
RfodConfig config_from_json(const nlohmann::json& json);

/// Writes manifest.json, quantiles.json and one forest_<j>.json per feature.
void save_model(const RfodModel& model, const std::filesystem::path& dir);
/// Throws InputError for missing files or an unknown format version.
RfodModel load_model(const std::filesystem::path& dir);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

/// Long format: row_id,column_id,value.
void write_cell_matrix(const Matrix& values, std::ostream& out);
/// row_id,score
void write_row_scores(std::span<const double> scores, std::ostream& out);

/// x_hat.csv (wide, category names for categorical features), uncertainty.csv
/// (wide) and cat_probabilities.csv (row_id,feature,category,probability).
void write_reconstruction(const RfodModel& model, const ReconstructionResult& recon, const std::filesystem::path& dir);

/// {features, rows, scores} bundle for external plotting. `rows` selects
/// which rows to include (all when empty).
nlohmann::json heatmap_json(std::span<const std::string> features, const Matrix& cell_scores,
                            std::span<const double> row_scores, std::span<const std::size_t> rows = {});

/// Reads a long-format cell matrix written by write_cell_matrix.
Matrix read_cell_matrix(std::istream& in);
std::vector<double> read_row_scores(std::istream& in);

}  // namespace rfod
