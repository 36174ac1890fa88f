#include "nestcov/regularizers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nestcov/estimators.hpp"
#include "nestcov/rng.hpp"

namespace nestcov {

namespace {

SpdMatrix certify_or_keep(Matrix m) {
  try {
    return SpdMatrix::certified(m);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NotPositiveDefinite) throw;
    return SpdMatrix::uncertified(std::move(m));
  }
}

double clipped_objective(const Vector& l, double tau, double kappa) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    const double m = std::clamp(l[i], tau, kappa * tau);
    sum += -std::log(m) - l[i] / m;
  }
  return sum;
}

struct Spectrum {
  Vector values;   // descending
  Matrix vectors;  // columns match `values`
};

Spectrum descending_spectrum(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  if (eig.info() != Eigen::Success)
    fail(ErrorKind::InvalidArgument, "eigendecomposition failed");
  Spectrum out;
  out.values = eig.eigenvalues().reverse().cwiseMax(0.0);
  out.vectors = eig.eigenvectors().rowwise().reverse();
  return out;
}

Matrix compose(const Matrix& vectors, const Vector& values) {
  Matrix m = vectors * values.asDiagonal() * vectors.transpose();
  return 0.5 * (m + m.transpose());
}

}  // namespace

ShrinkageResult ledoit_wolf(const SampleSet& sample) {
  const Eigen::Index n_obs = sample.size();
  if (n_obs < 2) fail(ErrorKind::SampleTooSmall, "shrinkage needs N >= 2");
  const Matrix& x = sample.data();
  if (x.cwiseAbs().maxCoeff() == 0.0)
    fail(ErrorKind::DegenerateSample, "all observations are zero");

  const Matrix s = sample_covariance(sample);
  const double n = static_cast<double>(x.rows());
  const double mu = s.trace() / n;
  const double dispersion = (s - mu * Matrix::Identity(x.rows(), x.rows())).squaredNorm() / n;

  // |x x^T - S|_F^2 = |x|^4 - 2 x^T S x + |S|_F^2
  const double s_norm2 = s.squaredNorm();
  double beta_sum = 0.0;
  for (Eigen::Index k = 0; k < n_obs; ++k) {
    const auto col = x.col(k);
    const double sq = col.squaredNorm();
    beta_sum += sq * sq - 2.0 * col.dot(s * col) + s_norm2;
  }
  const double nn = static_cast<double>(n_obs);
  const double beta = beta_sum / (nn * nn * n);
  const double b2 = std::min(beta, dispersion);
  const double gamma = dispersion > 0.0 ? 1.0 - b2 / dispersion : 0.0;

  Matrix estimate = gamma * s;
  estimate.diagonal().array() += (1.0 - gamma) * mu;
  return {certify_or_keep(std::move(estimate)), gamma, mu};
}

ClippedSpectrum cond_reg_solve(const Vector& sample_eigs, double kappa) {
  if (sample_eigs.size() < 1 || !(sample_eigs.maxCoeff() > 0.0))
    fail(ErrorKind::InvalidArgument, "need at least one positive eigenvalue");
  if (!(kappa >= 1.0)) fail(ErrorKind::InvalidArgument, "kappa must be >= 1");
  if ((sample_eigs.array() < 0.0).any())
    fail(ErrorKind::InvalidArgument, "eigenvalues must be non-negative");

  const double l_max = sample_eigs.maxCoeff();
  const double l_min = sample_eigs.minCoeff();
  if (l_min > 0.0 && l_max <= kappa * l_min) return {l_min, sample_eigs};

  // The maximizer lies in [max(l_min, l_max / (kappa n)), l_max / kappa] and the
  // objective is unimodal there.
  double lo = std::max(l_min, l_max / (kappa * static_cast<double>(sample_eigs.size())));
  double hi = l_max / kappa;
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - ratio * (hi - lo);
  double b = lo + ratio * (hi - lo);
  double fa = clipped_objective(sample_eigs, a, kappa);
  double fb = clipped_objective(sample_eigs, b, kappa);
  for (int it = 0; it < 200 && (hi - lo) > 1e-15 * hi; ++it) {
    if (fa >= fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - ratio * (hi - lo);
      fa = clipped_objective(sample_eigs, a, kappa);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + ratio * (hi - lo);
      fb = clipped_objective(sample_eigs, b, kappa);
    }
  }
  double tau = 0.5 * (lo + hi);
  // Polish: for a fixed clipping pattern the stationary tau is explicit.
  for (int it = 0; it < 8; ++it) {
    double sum = 0.0;
    int count = 0;
    for (double l : sample_eigs) {
      if (l < tau) sum += l, ++count;
      else if (l > kappa * tau) sum += l / kappa, ++count;
    }
    if (count == 0) break;
    const double next = sum / count;
    if (!(next > 0.0) || next == tau) break;
    const double f_tau = clipped_objective(sample_eigs, tau, kappa);
    if (clipped_objective(sample_eigs, next, kappa) < f_tau - 1e-12 * (1.0 + std::abs(f_tau))) break;
    tau = next;
  }
  Vector shrunk = sample_eigs;
  for (Eigen::Index i = 0; i < shrunk.size(); ++i)
    shrunk[i] = std::clamp(sample_eigs[i], tau, kappa * tau);
  return {tau, shrunk};
}

SpdMatrix cond_reg_estimate(const SampleSet& sample, double kappa) {
  const Spectrum spectrum = descending_spectrum(sample_covariance(sample));
  const ClippedSpectrum clipped = cond_reg_solve(spectrum.values, kappa);
  return certify_or_keep(compose(spectrum.vectors, clipped.eigenvalues));
}

std::vector<double> default_kappa_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 32; ++i) grid.push_back(std::pow(10.0, i / 8.0));
  return grid;
}

CondRegResult cond_reg_cv(const SampleSet& sample, const std::vector<double>& kappa_grid,
                          int folds, std::uint64_t shuffle_seed) {
  const Eigen::Index n_obs = sample.size();
  if (folds < 2 || n_obs < folds)
    fail(ErrorKind::InvalidArgument, "cross-validation needs N >= K >= 2");
  if (kappa_grid.empty()) fail(ErrorKind::InvalidArgument, "empty kappa grid");
  std::vector<double> grid = kappa_grid;
  for (double k : grid)
    if (!(k >= 1.0)) fail(ErrorKind::InvalidArgument, "kappa values must be >= 1");
  std::sort(grid.begin(), grid.end());

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n_obs));
  for (Eigen::Index i = 0; i < n_obs; ++i) order[static_cast<std::size_t>(i)] = i;
  RandomStream rng(shuffle_seed);
  for (std::size_t i = order.size() - 1; i > 0; --i)
    std::swap(order[i], order[static_cast<std::size_t>(rng.below(i + 1))]);

  const double n = static_cast<double>(sample.dim());
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  std::vector<double> totals(grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    const Eigen::Index begin = n_obs * f / folds;
    const Eigen::Index end = n_obs * (f + 1) / folds;
    std::vector<Eigen::Index> train, held;
    for (Eigen::Index i = 0; i < n_obs; ++i)
      (i >= begin && i < end ? held : train).push_back(order[static_cast<std::size_t>(i)]);

    const SampleSet train_set = sample.select(train);
    const Matrix s = sample_covariance(train_set);
    if (!(s.trace() > 0.0))
      fail(ErrorKind::FoldTooSmall, "training fold " + std::to_string(f) + " is all zero");
    const Spectrum spectrum = descending_spectrum(s);
    // Held-out projections onto the training eigenbasis.
    const Matrix proj = spectrum.vectors.transpose() * sample.select(held).data();
    const Matrix proj2 = proj.array().square();

    for (std::size_t g = 0; g < grid.size(); ++g) {
      const ClippedSpectrum clipped = cond_reg_solve(spectrum.values, grid[g]);
      const Vector inv = clipped.eigenvalues.cwiseInverse();
      const double log_det = clipped.eigenvalues.array().log().sum();
      const Vector quad = proj2.transpose() * inv;
      const double mean_ll = (-0.5 * (quad.array() + log_det + n * log_2pi)).mean();
      totals[g] += mean_ll / static_cast<double>(folds);
    }
  }

  CondRegResult result{SpdMatrix::uncertified(Matrix::Identity(1, 1)), grid.front(), 0.0, {}};
  std::size_t best = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    result.cv_scores.push_back({grid[g], totals[g]});
    if (totals[g] > totals[best]) best = g;
  }
  result.kappa = grid[best];

  const Spectrum full = descending_spectrum(sample_covariance(sample));
  const ClippedSpectrum clipped = cond_reg_solve(full.values, result.kappa);
  result.tau = clipped.tau;
  result.estimate = certify_or_keep(compose(full.vectors, clipped.eigenvalues));
  return result;
}

}  // namespace nestcov
