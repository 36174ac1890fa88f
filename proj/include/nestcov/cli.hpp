#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nestcov/simulation.hpp"

namespace nestcov {

enum class Command { SimulateDiag, SimulateGmrf, CompareShrinkage, FisherTrace, Estimate };

std::string_view to_string(Command command) noexcept;
std::optional<Command> parse_command(std::string_view text) noexcept;

struct CliConfig {
  Command command = Command::SimulateDiag;
  std::filesystem::path config_path;
  std::filesystem::path output_dir;
  std::optional<std::uint64_t> seed_override;
  bool svg = false;
  /// 0 = hardware concurrency.
  unsigned threads = 0;
};

/// One fit per model and sample size on replication 0 of each N:
/// model,N,status,iterations,residual_norm,params (params ';'-separated).
std::string estimate_report(const ExperimentConfig& config);

/// Runs a command end to end and returns the files written, in order.
/// Outputs are named after the command (e.g. simulate-diag.csv).
std::vector<std::filesystem::path> run_command(const CliConfig& cli);

/// Parses NESTCOV_THREADS; unset or invalid means 0 (auto).
unsigned threads_from_env();

}  // namespace nestcov
