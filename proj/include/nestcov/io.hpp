#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "nestcov/simulation.hpp"

namespace nestcov {

/// Parses an experiment document. Keys: kind (required), grid {rows, cols},
/// truth, sample_sizes, replications, seed, estimators, cv {folds,
/// kappa_grid}. Unknown keys are rejected. Truth is {c, alpha} or
/// {c1, c2, alpha} for decay kinds and {theta: [..]} for Gmrf.
/// Throws ParseError (malformed JSON or wrong types) or ValidationError.
ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig parse_config(const std::filesystem::path& path);

/// Canonical JSON form; parse_config_text(config_to_json(c)) == c.
std::string config_to_json(const ExperimentConfig& config);

/// Shortest representation that reads back to the same double.
std::string format_double(double value);

std::string format_csv(const ExperimentTable& table);
ExperimentTable parse_csv(std::string_view text);
void emit_csv(const ExperimentTable& table, const std::filesystem::path& path);

std::string format_trace_csv(const std::vector<TraceRow>& rows);

/// Standalone SVG 1.1 line plot of mean error versus N, log-scale y axis.
/// Throws EmptyTable when there is nothing to draw.
std::string render_svg_plot(const ExperimentTable& table, std::string_view title);
void emit_svg_plot(const ExperimentTable& table, const std::filesystem::path& path,
                   std::string_view title = "Mean squared Frobenius error");

/// Writes `content` to `path` in binary mode; throws IoError.
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace nestcov
