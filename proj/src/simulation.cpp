#include "nestcov/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <thread>

#include "nestcov/estimators.hpp"
#include "nestcov/fisher.hpp"
#include "nestcov/regularizers.hpp"
#include "nestcov/rng.hpp"

namespace nestcov {

std::string_view to_string(ExperimentKind kind) noexcept {
  switch (kind) {
    case ExperimentKind::DiagDecay: return "DiagDecay";
    case ExperimentKind::Gmrf: return "Gmrf";
    case ExperimentKind::ShrinkCompare: return "ShrinkCompare";
  }
  return "Unknown";
}

std::optional<ExperimentKind> parse_experiment_kind(std::string_view text) noexcept {
  for (auto kind : {ExperimentKind::DiagDecay, ExperimentKind::Gmrf, ExperimentKind::ShrinkCompare})
    if (text == to_string(kind)) return kind;
  return std::nullopt;
}

std::vector<std::string> estimator_tags(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::DiagDecay:
      return {"sample", "diag", "mle_diag", "decay3", "decay2"};
    case ExperimentKind::Gmrf:
      return {"sample", "gmrf_n4", "gmrf_n8", "gmrf_n12",
              "gmrf_n4_precision", "gmrf_n8_precision", "gmrf_n12_precision"};
    case ExperimentKind::ShrinkCompare:
      return {"sample", "diag", "decay2", "ledoit_wolf", "cond_reg"};
  }
  return {};
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  switch (kind) {
    case ExperimentKind::DiagDecay:
    case ExperimentKind::ShrinkCompare:
      c.truth = {30.0, 0.0, 0.002};
      c.sample_sizes = {5, 10, 15, 20};
      c.estimators = estimator_tags(kind);
      break;
    case ExperimentKind::Gmrf:
      c.truth = {5.0, -0.2, 0.5};
      for (int n = 10; n <= 55; n += 5) c.sample_sizes.push_back(n);
      c.estimators = {"sample", "gmrf_n4", "gmrf_n8", "gmrf_n12"};
      break;
  }
  if (kind == ExperimentKind::ShrinkCompare) c.kappa_grid = default_kappa_grid();
  return c;
}

void validate(const ExperimentConfig& c) {
  const auto invalid = [](const std::string& what) { fail(ErrorKind::ValidationError, what); };
  if (c.replications < 1) invalid("replications must be >= 1");
  if (c.rows < 1 || c.cols < 1) invalid("grid rows and cols must be >= 1");
  if (c.sample_sizes.empty()) invalid("sample_sizes must be non-empty");
  for (std::size_t i = 0; i < c.sample_sizes.size(); ++i) {
    if (c.sample_sizes[i] < 1) invalid("sample_sizes entries must be >= 1");
    if (i > 0 && c.sample_sizes[i] <= c.sample_sizes[i - 1])
      invalid("sample_sizes must be strictly increasing");
  }
  if (c.estimators.empty()) invalid("estimators must be non-empty");
  const auto allowed = estimator_tags(c.kind);
  for (const auto& tag : c.estimators) {
    if (std::find(allowed.begin(), allowed.end(), tag) == allowed.end())
      invalid("estimator '" + tag + "' is not available for kind " + std::string(to_string(c.kind)));
    if (std::count(c.estimators.begin(), c.estimators.end(), tag) > 1)
      invalid("estimator '" + tag + "' listed twice");
  }
  if (c.kind == ExperimentKind::Gmrf) {
    if (c.truth.size() != 3) invalid("Gmrf truth needs 3 precision weights");
    if (c.rows < 3 || c.cols < 3) invalid("Gmrf grid needs at least 3 x 3 nodes");
  } else {
    if (c.truth.size() != 3) invalid("decay truth needs (c1, c2, alpha)");
    if (c.rows * c.cols < 2) invalid("decay grid needs at least 2 nodes");
  }
  if (c.kind == ExperimentKind::ShrinkCompare) {
    if (c.folds < 2) invalid("folds must be >= 2");
    if (c.kappa_grid.empty()) invalid("kappa_grid must be non-empty");
    for (double k : c.kappa_grid)
      if (!(k >= 1.0)) invalid("kappa_grid entries must be >= 1");
    if (std::find(c.estimators.begin(), c.estimators.end(), "cond_reg") != c.estimators.end() &&
        c.sample_sizes.front() < c.folds)
      invalid("cond_reg needs every sample size >= folds");
  }
  for (double v : c.truth)
    if (!std::isfinite(v)) invalid("truth entries must be finite");
}

const ExperimentRow* ExperimentTable::find(std::string_view estimator, int N) const {
  for (const auto& row : rows)
    if (row.estimator == estimator && row.N == N) return &row;
  return nullptr;
}

SampleSet gaussian_sample(const SpdMatrix& cov, Eigen::Index N, std::uint64_t seed) {
  if (N < 1) fail(ErrorKind::InvalidArgument, "sample size must be positive");
  const Matrix& l = cov.factor();
  RandomStream stream(seed);
  Matrix z(cov.size(), N);
  for (Eigen::Index col = 0; col < N; ++col)
    for (Eigen::Index row = 0; row < cov.size(); ++row) z(row, col) = stream.normal();
  Matrix x = l.triangularView<Eigen::Lower>() * z;
  return SampleSet(std::move(x), seed);
}

double frobenius_error(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    fail(ErrorKind::ShapeMismatch, "matrices differ in shape");
  return (a - b).squaredNorm();
}

std::pair<double, double> aggregate(const std::vector<double>& errors) {
  if (errors.empty()) fail(ErrorKind::EmptyInput, "no values to aggregate");
  double mean = 0.0, m2 = 0.0;
  std::size_t count = 0;
  for (double e : errors) {
    ++count;
    const double delta = e - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (e - mean);
  }
  if (count < 2) return {mean, 0.0};
  const double sd = std::sqrt(m2 / static_cast<double>(count - 1));
  return {mean, sd / std::sqrt(static_cast<double>(count))};
}

std::uint64_t replication_seed(std::uint64_t seed, int N, int replication) noexcept {
  return stream_seed(seed, static_cast<std::uint64_t>(N), static_cast<std::uint64_t>(replication));
}

DecayModel decay_truth(const ExperimentConfig& config) {
  DecaySpectrum spectrum(laplace_eigenvalues(config.rows, config.cols));
  if (config.truth.size() != 3)
    fail(ErrorKind::ValidationError, "decay truth needs (c1, c2, alpha)");
  if (config.truth[1] == 0.0)
    return DecayModel::two_param(std::move(spectrum), config.truth[0], config.truth[2]);
  return DecayModel::three_param(std::move(spectrum), config.truth[0], config.truth[1],
                                 config.truth[2]);
}

namespace {

constexpr double kFailed = std::numeric_limits<double>::quiet_NaN();

// Errors of every requested estimator for one replication; NaN marks failure.
using ReplicationFn = std::function<std::vector<double>(const SampleSet&)>;

template <typename F>
double guarded(F&& f) {
  try {
    return f();
  } catch (const Error&) {
    return kFailed;
  }
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

ExperimentTable run_replications(const ExperimentConfig& config, const SpdMatrix& truth_cov,
                                 const ReplicationFn& replicate, const RunOptions& options) {
  validate(config);
  const std::size_t n_sizes = config.sample_sizes.size();
  const std::size_t reps = static_cast<std::size_t>(config.replications);
  const std::size_t n_est = config.estimators.size();
  const std::size_t tasks = n_sizes * reps;
  // errors[(task) * n_est + e]; each task writes only its own slots.
  std::vector<double> errors(tasks * n_est, kFailed);

  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    for (std::size_t t = next.fetch_add(1); t < tasks; t = next.fetch_add(1)) {
      const int N = config.sample_sizes[t / reps];
      const int r = static_cast<int>(t % reps);
      const SampleSet sample = gaussian_sample(truth_cov, N, replication_seed(config.seed, N, r));
      const std::vector<double> e = replicate(sample);
      std::copy(e.begin(), e.end(), errors.begin() + static_cast<std::ptrdiff_t>(t * n_est));
    }
  };
  const unsigned n_threads = std::min<unsigned>(resolve_threads(options.threads),
                                                static_cast<unsigned>(std::max<std::size_t>(tasks, 1)));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }

  ExperimentTable table;
  for (std::size_t e = 0; e < n_est; ++e) {
    for (std::size_t s = 0; s < n_sizes; ++s) {
      std::vector<double> ok;
      int failures = 0;
      for (std::size_t r = 0; r < reps; ++r) {
        const double v = errors[(s * reps + r) * n_est + e];
        if (std::isfinite(v)) ok.push_back(v); else ++failures;
      }
      ExperimentRow row;
      row.estimator = config.estimators[e];
      row.N = config.sample_sizes[s];
      row.replications = static_cast<int>(ok.size());
      row.failures = failures;
      if (!ok.empty()) std::tie(row.mean_sq_frobenius, row.std_error) = aggregate(ok);
      else row.mean_sq_frobenius = row.std_error = std::numeric_limits<double>::quiet_NaN();
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

double diag_error(const Vector& estimate, const Vector& truth) {
  return (estimate - truth).squaredNorm();
}

}  // namespace

ExperimentTable run_diag_experiment(const ExperimentConfig& config, const RunOptions& options) {
  if (config.kind != ExperimentKind::DiagDecay)
    fail(ErrorKind::ValidationError, "run_diag_experiment needs kind DiagDecay");
  validate(config);
  const DecayModel truth = decay_truth(config);
  const Vector d = decay_diagonal(truth).d();
  const SpdMatrix cov = SpdMatrix::certified(d.asDiagonal().toDenseMatrix());
  const DecaySpectrum& spectrum = truth.spectrum();
  const Matrix d_dense = d.asDiagonal();

  const auto replicate = [&](const SampleSet& sample) {
    const SufficientStats stats = sufficient_stats(sample);
    std::vector<double> out;
    for (const auto& tag : config.estimators) {
      if (tag == "sample") {
        out.push_back(frobenius_error(sample_covariance(sample), d_dense));
      } else if (tag == "diag") {
        out.push_back(diag_error(stats.s2 / static_cast<double>(stats.N), d));
      } else if (tag == "mle_diag") {
        out.push_back(guarded([&] { return diag_error(diagonal_mle(stats).d(), d); }));
      } else if (tag == "decay3") {
        out.push_back(guarded([&] {
          const FitReport fit = fit_decay3(stats, spectrum);
          const auto model = DecayModel::three_param(spectrum, fit.params[0], fit.params[1],
                                                     fit.params[2]);
          return diag_error(decay_diagonal(model).d(), d);
        }));
      } else if (tag == "decay2") {
        out.push_back(guarded([&] {
          const FitReport fit = fit_decay2(stats, spectrum);
          const auto model = DecayModel::two_param(spectrum, fit.params[0], fit.params[1]);
          return diag_error(decay_diagonal(model).d(), d);
        }));
      }
    }
    return out;
  };
  return run_replications(config, cov, replicate, options);
}

ExperimentTable run_gmrf_experiment(const ExperimentConfig& config, const RunOptions& options) {
  if (config.kind != ExperimentKind::Gmrf)
    fail(ErrorKind::ValidationError, "run_gmrf_experiment needs kind Gmrf");
  validate(config);
  const GmrfStructure n4 = gmrf_structure(config.rows, config.cols, NeighborLevel::N4);
  const GmrfStructure n8 = gmrf_structure(config.rows, config.cols, NeighborLevel::N8);
  const GmrfStructure n12 = gmrf_structure(config.rows, config.cols, NeighborLevel::N12);
  const Vector theta = Eigen::Map<const Vector>(config.truth.data(), 3);
  const SpdMatrix precision = precision_assemble(n4, theta);
  Matrix sigma = precision.values().llt().solve(Matrix::Identity(n4.dim(), n4.dim()));
  sigma = 0.5 * (sigma + sigma.transpose());
  const SpdMatrix cov = SpdMatrix::certified(sigma);

  const auto replicate = [&](const SampleSet& sample) {
    const Matrix s = sample_covariance(sample);
    struct Fitted {
      std::optional<Matrix> precision;
    };
    std::array<Fitted, 3> fits;
    const std::array<const GmrfStructure*, 3> levels{&n4, &n8, &n12};
    const auto fitted = [&](int level) -> const std::optional<Matrix>& {
      auto& slot = fits[static_cast<std::size_t>(level)];
      if (!slot.precision) {
        try {
          const FitReport fit = fit_gmrf(s, *levels[static_cast<std::size_t>(level)]);
          slot.precision = precision_matrix(*levels[static_cast<std::size_t>(level)], fit.params);
        } catch (const Error&) {
          slot.precision = Matrix();  // empty marks a failed fit
        }
      }
      return slot.precision;
    };
    std::vector<double> out;
    for (const auto& tag : config.estimators) {
      if (tag == "sample") {
        out.push_back(frobenius_error(s, cov.values()));
        continue;
      }
      const int level = tag.starts_with("gmrf_n4") ? 0 : tag.starts_with("gmrf_n8") ? 1 : 2;
      const bool precision_domain = tag.ends_with("_precision");
      const Matrix& p = *fitted(level);
      if (p.size() == 0) {
        out.push_back(kFailed);
      } else if (precision_domain) {
        out.push_back(frobenius_error(p, precision.values()));
      } else {
        Matrix est = p.llt().solve(Matrix::Identity(p.rows(), p.cols()));
        out.push_back(frobenius_error(est, cov.values()));
      }
    }
    return out;
  };
  return run_replications(config, cov, replicate, options);
}

ExperimentTable run_shrinkage_comparison(const ExperimentConfig& config,
                                         const RunOptions& options) {
  if (config.kind != ExperimentKind::ShrinkCompare)
    fail(ErrorKind::ValidationError, "run_shrinkage_comparison needs kind ShrinkCompare");
  validate(config);
  const DecayModel truth = decay_truth(config);
  const Vector d = decay_diagonal(truth).d();
  const SpdMatrix cov = SpdMatrix::certified(d.asDiagonal().toDenseMatrix());
  const DecaySpectrum& spectrum = truth.spectrum();
  const Matrix d_dense = d.asDiagonal();

  const auto replicate = [&](const SampleSet& sample) {
    const Matrix s = sample_covariance(sample);
    std::vector<double> out;
    for (const auto& tag : config.estimators) {
      if (tag == "sample") {
        out.push_back(frobenius_error(s, d_dense));
      } else if (tag == "diag") {
        out.push_back(diag_error(s.diagonal(), d));
      } else if (tag == "decay2") {
        out.push_back(guarded([&] {
          const FitReport fit = fit_decay2(sufficient_stats(sample), spectrum);
          const auto model = DecayModel::two_param(spectrum, fit.params[0], fit.params[1]);
          return diag_error(decay_diagonal(model).d(), d);
        }));
      } else if (tag == "ledoit_wolf") {
        out.push_back(guarded([&] {
          return frobenius_error(ledoit_wolf(sample).estimate.values(), d_dense);
        }));
      } else if (tag == "cond_reg") {
        out.push_back(guarded([&] {
          const std::uint64_t shuffle = mix64(*sample.seed() ^ 0x5EEDC0DEull);
          const CondRegResult r = cond_reg_cv(sample, config.kappa_grid, config.folds, shuffle);
          return frobenius_error(r.estimate.values(), d_dense);
        }));
      }
    }
    return out;
  };
  return run_replications(config, cov, replicate, options);
}

ExperimentTable run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  switch (config.kind) {
    case ExperimentKind::DiagDecay: return run_diag_experiment(config, options);
    case ExperimentKind::Gmrf: return run_gmrf_experiment(config, options);
    case ExperimentKind::ShrinkCompare: return run_shrinkage_comparison(config, options);
  }
  fail(ErrorKind::ValidationError, "unknown experiment kind");
}

std::vector<TraceRow> fisher_trace_report(const ExperimentConfig& config) {
  if (config.kind == ExperimentKind::Gmrf)
    fail(ErrorKind::ValidationError, "fisher-trace needs a decay configuration");
  validate(config);
  if (config.truth[1] != 0.0)
    fail(ErrorKind::ValidationError, "fisher-trace needs a nested truth with c2 == 0");
  const DecayModel truth = decay_truth(config);
  const NestedDecayCovariances q =
      nested_decay_covariances(truth.spectrum(), truth.c1(), truth.alpha());
  std::vector<TraceRow> rows;
  for (const auto& [name, cov] :
       {std::pair<const char*, const ProjectedCov*>{"diag", &q.diag}, {"decay3", &q.decay3},
        {"decay2", &q.decay2}}) {
    for (int N : config.sample_sizes) rows.push_back({name, N, asymptotic_mse(*cov, N)});
  }
  return rows;
}

}  // namespace nestcov
