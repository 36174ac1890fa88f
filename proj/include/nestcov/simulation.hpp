#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nestcov/model.hpp"

namespace nestcov {

enum class ExperimentKind { DiagDecay, Gmrf, ShrinkCompare };

std::string_view to_string(ExperimentKind kind) noexcept;
std::optional<ExperimentKind> parse_experiment_kind(std::string_view text) noexcept;

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::DiagDecay;
  Eigen::Index rows = 10;
  Eigen::Index cols = 10;
  /// DiagDecay / ShrinkCompare: (c1, c2, alpha); Gmrf: N4 precision weights.
  std::vector<double> truth;
  std::vector<int> sample_sizes;
  int replications = 50;
  std::uint64_t seed = 0;
  std::vector<std::string> estimators;
  /// Cross-validation settings of the condition-number estimator.
  int folds = 5;
  std::vector<double> kappa_grid;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Reference defaults for a kind: 10 x 10 grid, 50 replications, and the
/// kind's truth, sample sizes and estimator set.
ExperimentConfig default_config(ExperimentKind kind);

/// Estimator tags accepted by a kind, in reporting order.
std::vector<std::string> estimator_tags(ExperimentKind kind);

/// Throws ValidationError naming the first violated invariant.
void validate(const ExperimentConfig& config);

struct ExperimentRow {
  std::string estimator;
  int N = 0;
  double mean_sq_frobenius = 0.0;
  double std_error = 0.0;
  int replications = 0;
  int failures = 0;
};

struct ExperimentTable {
  std::vector<ExperimentRow> rows;

  const ExperimentRow* find(std::string_view estimator, int N) const;
};

struct RunOptions {
  /// Worker threads; 0 selects the hardware concurrency.
  unsigned threads = 0;
};

/// Sample of N columns L z with z drawn from the stream keyed by `seed`.
SampleSet gaussian_sample(const SpdMatrix& cov, Eigen::Index N, std::uint64_t seed);

/// Squared Frobenius norm of a - b.
double frobenius_error(const Matrix& a, const Matrix& b);

/// Mean and standard error (sample standard deviation / sqrt(count)).
std::pair<double, double> aggregate(const std::vector<double>& errors);

/// Seed of replication r at sample size N.
std::uint64_t replication_seed(std::uint64_t seed, int N, int replication) noexcept;

ExperimentTable run_diag_experiment(const ExperimentConfig& config, const RunOptions& options = {});
ExperimentTable run_gmrf_experiment(const ExperimentConfig& config, const RunOptions& options = {});
ExperimentTable run_shrinkage_comparison(const ExperimentConfig& config,
                                         const RunOptions& options = {});
/// Dispatches on config.kind.
ExperimentTable run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

struct TraceRow {
  std::string model;
  int N = 0;
  double value = 0.0;
};

/// (1/N) Tr Q for the diagonal, three- and two-parameter decay models at
/// the configured decay truth (which must have c2 == 0).
std::vector<TraceRow> fisher_trace_report(const ExperimentConfig& config);

/// Diagonal truth of a decay configuration on its grid's Laplace spectrum.
DecayModel decay_truth(const ExperimentConfig& config);

}  // namespace nestcov
