#include "nestcov/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace nestcov {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

void check_stats(const SufficientStats& stats, Eigen::Index n) {
  if (stats.N < 1) fail(ErrorKind::InvalidArgument, "sample size must be positive");
  if (stats.s2.size() != n)
    fail(ErrorKind::ShapeMismatch, "statistics length " + std::to_string(stats.s2.size()) +
                                       " differs from model dimension " + std::to_string(n));
  if (!stats.s2.allFinite() || (stats.s2.array() < 0.0).any())
    fail(ErrorKind::InvalidArgument, "sums of squares must be finite and non-negative");
}

bool feasible3(const Eigen::Vector3d& p, const Vector& h) {
  if (!p.allFinite()) return false;
  return ((p[0] + p[1] * h.array()) > 0.0).all();
}

// Scale-free residual of the profiled alpha equation and its derivative.
struct AlphaResidual {
  const Vector& h;
  const Vector& s2;
  double h_mean;
  double spread;

  std::pair<double, double> operator()(double alpha) const {
    double shift = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < h.size(); ++i)
      if (s2[i] > 0.0) shift = std::max(shift, alpha * h[i] + std::log(s2[i]));
    double w_sum = 0.0, first = 0.0, second = 0.0;
    for (Eigen::Index i = 0; i < h.size(); ++i) {
      if (s2[i] <= 0.0) continue;
      const double w = std::exp(alpha * h[i] + std::log(s2[i]) - shift);
      const double dh = h[i] - h_mean;
      w_sum += w;
      first += w * dh;
      second += w * dh * dh;
    }
    const double mean = first / w_sum;
    const double variance = second / w_sum - mean * mean;
    return {mean / spread, std::max(variance, 0.0) / spread};
  }
};

}  // namespace

Matrix sample_covariance(const SampleSet& sample) {
  const Matrix& x = sample.data();
  Matrix s = Matrix::Zero(x.rows(), x.rows());
  s.selfadjointView<Eigen::Lower>().rankUpdate(x, 1.0 / static_cast<double>(x.cols()));
  Matrix full = s.selfadjointView<Eigen::Lower>();
  // Same arithmetic as diagonal_mle, so the two agree bit for bit.
  const SufficientStats stats = sufficient_stats(sample);
  full.diagonal() = stats.s2 / static_cast<double>(stats.N);
  return full;
}

Matrix unbiased_sample_covariance(const SampleSet& sample) {
  const Eigen::Index n_obs = sample.size();
  if (n_obs < 2) fail(ErrorKind::SampleTooSmall, "unbiased covariance needs N >= 2");
  const double scale = static_cast<double>(n_obs) / static_cast<double>(n_obs - 1);
  return scale * sample_covariance(sample);
}

SufficientStats sufficient_stats(const SampleSet& sample) {
  return {sample.data().rowwise().squaredNorm(), sample.size()};
}

DiagonalCovariance diagonal_mle(const SufficientStats& stats) {
  check_stats(stats, stats.s2.size());
  for (Eigen::Index j = 0; j < stats.s2.size(); ++j)
    if (stats.s2[j] == 0.0)
      fail(ErrorKind::ZeroVariance, "coordinate " + std::to_string(j) +
                                        " is identically zero; likelihood is unbounded");
  return DiagonalCovariance(stats.s2 / static_cast<double>(stats.N));
}

double loglik_diagonal(const DiagonalCovariance& d, const SufficientStats& stats) {
  check_stats(stats, d.size());
  const double n_obs = static_cast<double>(stats.N);
  const double n = static_cast<double>(d.size());
  const Vector& tau = d.tau();
  return -0.5 * n_obs * n * kLog2Pi + 0.5 * n_obs * tau.array().log().sum() -
         0.5 * tau.dot(stats.s2);
}

FitReport fit_decay2(const SufficientStats& stats, const DecaySpectrum& spectrum,
                     double tolerance) {
  const Vector& h = spectrum.h();
  check_stats(stats, h.size());
  if (!(stats.s2.array() > 0.0).any())
    fail(ErrorKind::ZeroVariance, "all sums of squares are zero");
  const double spread = h.maxCoeff() - h.minCoeff();
  if (!(spread > 0.0))
    fail(ErrorKind::NoBracket, "decay rate is not identifiable from a flat spectrum");

  const AlphaResidual residual{h, stats.s2, h.mean(), spread};
  constexpr double kAlphaLimit = 1e3;

  int evaluations = 0;
  double lo = 0.0;
  double r_lo = residual(lo).first;
  ++evaluations;
  double alpha = 0.0;
  if (r_lo != 0.0) {
    const double direction = r_lo < 0.0 ? 1.0 : -1.0;
    double step = 1e-3 / spread;
    double hi = direction * step;
    double r_hi = residual(hi).first;
    ++evaluations;
    while ((r_hi < 0.0) == (r_lo < 0.0) && r_hi != 0.0) {
      if (std::abs(hi) >= kAlphaLimit)
        fail(ErrorKind::NoBracket, "no sign change of the alpha equation for |alpha| <= 1e3");
      lo = hi;
      r_lo = r_hi;
      step *= 2.0;
      hi = direction * std::min(step, kAlphaLimit);
      r_hi = residual(hi).first;
      ++evaluations;
    }
    // Invariant: r(lo) and r(hi) have opposite signs (or r(hi) == 0).
    while (std::abs(hi - lo) > 1e-12 && r_hi != 0.0) {
      const double mid = 0.5 * (lo + hi);
      const double r_mid = residual(mid).first;
      ++evaluations;
      if (r_mid == 0.0) {
        lo = hi = mid;
        r_hi = 0.0;
        break;
      }
      if ((r_mid < 0.0) == (r_lo < 0.0)) {
        lo = mid;
        r_lo = r_mid;
      } else {
        hi = mid;
        r_hi = r_mid;
      }
    }
    alpha = r_hi == 0.0 ? hi : 0.5 * (lo + hi);
    const double a_min = std::min(lo, hi), a_max = std::max(lo, hi);
    // Newton polish; the residual is increasing in alpha.
    for (int it = 0; it < 50; ++it) {
      const auto [r, dr] = residual(alpha);
      ++evaluations;
      if (std::abs(r) <= 0.01 * tolerance || !(dr > 0.0)) break;
      const double next = std::clamp(alpha - r / dr, a_min, a_max);
      if (next == alpha) break;
      alpha = next;
    }
  }

  // 1/c = mean_i (S_i^2 / N) exp(alpha h_i), accumulated with a shift.
  double shift = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < h.size(); ++i)
    if (stats.s2[i] > 0.0) shift = std::max(shift, alpha * h[i] + std::log(stats.s2[i]));
  double sum = 0.0;
  for (Eigen::Index i = 0; i < h.size(); ++i)
    if (stats.s2[i] > 0.0) sum += std::exp(alpha * h[i] + std::log(stats.s2[i]) - shift);
  const double log_inv_c = shift + std::log(sum) - std::log(static_cast<double>(h.size())) -
                           std::log(static_cast<double>(stats.N));
  const double c = std::exp(-log_inv_c);
  if (!std::isfinite(c) || !(c > 0.0))
    fail(ErrorKind::NotConverged, "scale estimate is not finite");

  double c_sum = 0.0;
  for (Eigen::Index i = 0; i < h.size(); ++i)
    c_sum += stats.s2[i] / static_cast<double>(stats.N) * std::exp(alpha * h[i]);
  const double r_c = 1.0 - c * c_sum / static_cast<double>(h.size());
  const double r_alpha = residual(alpha).first;

  FitReport report;
  report.params = Vector{{c, alpha}};
  report.iterations = evaluations;
  report.residual_norm = std::max(std::abs(r_c), std::abs(r_alpha));
  report.converged = report.residual_norm <= tolerance;
  if (!report.converged)
    fail(ErrorKind::NotConverged, "two-parameter fit residual " +
                                      std::to_string(report.residual_norm) + " above tolerance");
  return report;
}

Eigen::Vector3d decay_score3(const Eigen::Vector3d& params, const SufficientStats& stats,
                             const DecaySpectrum& spectrum) {
  const Vector& h = spectrum.h();
  check_stats(stats, h.size());
  if (!feasible3(params, h))
    fail(ErrorKind::InfeasibleParams, "c1 + c2 h_i must be positive for every i");
  const double c1 = params[0], c2 = params[1], alpha = params[2];
  const double n_obs = static_cast<double>(stats.N);
  Eigen::Vector3d s = Eigen::Vector3d::Zero();
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    const double u = c1 + c2 * h[i];
    const double wf = stats.s2[i] / n_obs * std::exp(alpha * h[i]);
    s[0] += 1.0 / u - wf;
    s[1] += h[i] / u - wf * h[i];
    // f_i'/f_i = h_i for f_i(alpha) = exp(alpha h_i).
    s[2] += h[i] - wf * u * h[i];
  }
  return s;
}

Eigen::Matrix3d decay_score3_jacobian(const Eigen::Vector3d& params,
                                      const SufficientStats& stats,
                                      const DecaySpectrum& spectrum) {
  const Vector& h = spectrum.h();
  check_stats(stats, h.size());
  if (!feasible3(params, h))
    fail(ErrorKind::InfeasibleParams, "c1 + c2 h_i must be positive for every i");
  const double c1 = params[0], c2 = params[1], alpha = params[2];
  const double n_obs = static_cast<double>(stats.N);
  Eigen::Matrix3d j = Eigen::Matrix3d::Zero();
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    const double u = c1 + c2 * h[i];
    const double hi = h[i];
    const double wf = stats.s2[i] / n_obs * std::exp(alpha * hi);
    const double inv_u2 = 1.0 / (u * u);
    j(0, 0) -= inv_u2;
    j(0, 1) -= hi * inv_u2;
    j(1, 1) -= hi * hi * inv_u2;
    j(0, 2) -= wf * hi;
    j(1, 2) -= wf * hi * hi;
    j(2, 2) -= wf * u * hi * hi;
  }
  j(1, 0) = j(0, 1);
  j(2, 0) = j(0, 2);
  j(2, 1) = j(1, 2);
  return j;
}

double loglik_decay3(const Eigen::Vector3d& params, const SufficientStats& stats,
                     const DecaySpectrum& spectrum) {
  const Vector& h = spectrum.h();
  check_stats(stats, h.size());
  if (!feasible3(params, h))
    fail(ErrorKind::InfeasibleParams, "c1 + c2 h_i must be positive for every i");
  const double n_obs = static_cast<double>(stats.N);
  double log_tau = 0.0, quad = 0.0;
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    const double u = params[0] + params[1] * h[i];
    log_tau += std::log(u) + params[2] * h[i];
    quad += u * std::exp(params[2] * h[i]) * stats.s2[i];
  }
  return -0.5 * n_obs * static_cast<double>(h.size()) * kLog2Pi + 0.5 * n_obs * log_tau -
         0.5 * quad;
}

namespace {

Eigen::Matrix3d fd_jacobian(const Eigen::Vector3d& x, const SufficientStats& stats,
                            const DecaySpectrum& spectrum) {
  Eigen::Matrix3d j;
  for (int k = 0; k < 3; ++k) {
    const double step = 1e-6 * std::max(1e-3, std::abs(x[k]));
    Eigen::Vector3d xp = x, xm = x;
    xp[k] += step;
    xm[k] -= step;
    j.col(k) = (decay_score3(xp, stats, spectrum) - decay_score3(xm, stats, spectrum)) /
               (2.0 * step);
  }
  return 0.5 * (j + j.transpose());
}

double loglik_or_nan(const Eigen::Vector3d& x, const SufficientStats& stats,
                     const DecaySpectrum& spectrum) {
  if (!feasible3(x, spectrum.h())) return std::numeric_limits<double>::quiet_NaN();
  return loglik_decay3(x, stats, spectrum);
}

}  // namespace

namespace {

// Safeguarded Newton ascent on the three-parameter score from a feasible x.
FitReport newton_decay3(Eigen::Vector3d x, const SufficientStats& stats,
                        const DecaySpectrum& spectrum, const SolverOptions& options) {
  double ll = loglik_decay3(x, stats, spectrum);
  Eigen::Vector3d s = decay_score3(x, stats, spectrum);
  // Jacobi scaling, then a modified Newton step along -jac with eigenvalues
  // forced positive so the direction always ascends the likelihood.
  const auto ascent_step = [&](const Eigen::Vector3d& at, const Eigen::Vector3d& score) {
    Eigen::Matrix3d jac = decay_score3_jacobian(at, stats, spectrum);
    if (!jac.allFinite() || jac.diagonal().cwiseAbs().minCoeff() == 0.0)
      jac = fd_jacobian(at, stats, spectrum);
    const Eigen::Vector3d scale = jac.diagonal().cwiseAbs().cwiseSqrt().cwiseInverse();
    const Eigen::Matrix3d neg = -(scale.asDiagonal() * jac * scale.asDiagonal());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(neg);
    Eigen::Vector3d mu = eig.eigenvalues().cwiseAbs();
    mu = mu.cwiseMax(std::max(mu.maxCoeff() * 1e-12, std::numeric_limits<double>::min()));
    return Eigen::Vector3d(
        scale.asDiagonal() *
        (eig.eigenvectors() * (eig.eigenvectors().transpose() * (scale.asDiagonal() * score))
                                  .cwiseQuotient(mu)));
  };
  FitReport report;
  for (int it = 0;; ++it) {
    report.iterations = it;
    if (s.cwiseAbs().maxCoeff() <= options.tolerance) break;
    if (it == options.max_iterations)
      fail(ErrorKind::NotConverged, "three-parameter fit did not converge in " +
                                        std::to_string(options.max_iterations) + " iterations");

    const Eigen::Vector3d step = ascent_step(x, s);
    const double s_norm = s.cwiseAbs().maxCoeff();
    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving <= options.max_halvings; ++halving, t *= 0.5) {
      const Eigen::Vector3d trial = x + t * step;
      const double ll_trial = loglik_or_nan(trial, stats, spectrum);
      if (!std::isfinite(ll_trial)) continue;
      const Eigen::Vector3d s_trial = decay_score3(trial, stats, spectrum);
      const double slack = 1e-13 * (1.0 + std::abs(ll));
      if (ll_trial >= ll - slack || s_trial.cwiseAbs().maxCoeff() < s_norm) {
        x = trial;
        ll = ll_trial;
        s = s_trial;
        accepted = true;
        break;
      }
    }
    if (!accepted)
      fail(ErrorKind::NotConverged, "three-parameter fit stalled at residual " +
                                        std::to_string(s_norm));
  }
  // A few plain Newton root steps, kept only while they shrink the residual.
  // Near c2 = 0 the Jacobian can be indefinite, which stalls the ascent step.
  for (int k = 0; k < 3; ++k) {
    const Eigen::Matrix3d jac = decay_score3_jacobian(x, stats, spectrum);
    const Eigen::Vector3d scale = jac.diagonal().cwiseAbs().cwiseSqrt().cwiseInverse();
    if (!scale.allFinite()) break;
    const Eigen::Matrix3d scaled = scale.asDiagonal() * jac * scale.asDiagonal();
    const Eigen::Vector3d trial =
        x - scale.asDiagonal() * scaled.fullPivLu().solve(scale.asDiagonal() * s);
    if (!feasible3(trial, spectrum.h())) break;
    const Eigen::Vector3d s_trial = decay_score3(trial, stats, spectrum);
    if (!(s_trial.cwiseAbs().maxCoeff() < s.cwiseAbs().maxCoeff())) break;
    const double ll_trial = loglik_decay3(trial, stats, spectrum);
    if (!(ll_trial >= ll - 1e-12 * (1.0 + std::abs(ll)))) break;
    x = trial;
    s = s_trial;
    ll = ll_trial;
  }
  report.params = x;
  report.residual_norm = s.cwiseAbs().maxCoeff();
  report.converged = true;
  return report;
}

}  // namespace

FitReport fit_decay3(const SufficientStats& stats, const DecaySpectrum& spectrum,
                     const std::optional<Eigen::Vector3d>& init,
                     const SolverOptions& options) {
  const Vector& h = spectrum.h();
  check_stats(stats, h.size());

  Eigen::Vector3d x;
  if (init) {
    x = *init;
    if (!feasible3(x, h))
      fail(ErrorKind::InfeasibleInit, "initial (c1, c2, alpha) has c1 + c2 h_i <= 0");
  } else {
    const FitReport two = fit_decay2(stats, spectrum);
    x = {two.params[0], 0.0, two.params[1]};
  }
  FitReport best = newton_decay3(x, stats, spectrum, options);

  // Every two-parameter optimum is a stationary point of the three-parameter
  // likelihood: at c2 = 0 the c2 and alpha directions coincide to first order.
  // Moving along c2 = e, alpha -= e / c1 perturbs d only at second order, by
  // d * (1 + t h^2) with t = e^2 / (2 c1^2) >= 0. If the likelihood rises
  // along that curve, restart from both signs of e and keep the better fit.
  const double c1 = best.params[0];
  if (std::abs(best.params[1]) * h.maxCoeff() > 1e-8 * std::abs(c1) || c1 <= 0.0) return best;
  const double n_obs = static_cast<double>(stats.N);
  const Vector tau = (c1 * (best.params[2] * h.array()).exp()).matrix();
  const Vector h2 = h.cwiseAbs2();
  const double slope = (h2.array() * (stats.s2.array() * tau.array() / n_obs - 1.0)).sum();
  if (!(slope > 0.0)) return best;

  const double ll0 = loglik_decay3(best.params, stats, spectrum);
  const double t_star = slope / h2.cwiseAbs2().sum();
  const double alpha0 = best.params[2];
  double ll_best = ll0;
  int evaluations = best.iterations;
  for (double sign : {1.0, -1.0}) {
    double e = sign * c1 * std::sqrt(2.0 * t_star);
    for (int k = 0; k < 60; ++k, e *= 0.5) {
      const Eigen::Vector3d start{c1, e, alpha0 - e / c1};
      const double ll_start = loglik_or_nan(start, stats, spectrum);
      if (!(std::isfinite(ll_start) && ll_start > ll0)) continue;
      try {
        FitReport r = newton_decay3(start, stats, spectrum, options);
        evaluations += r.iterations;
        const double ll_r = loglik_decay3(r.params, stats, spectrum);
        if (ll_r > ll_best) {
          best = r;
          ll_best = ll_r;
        }
      } catch (const Error&) {
      }
      break;
    }
  }
  best.iterations = evaluations;
  return best;
}

Vector basis_traces(const GmrfStructure& structure, const Matrix& m) {
  Vector t(static_cast<Eigen::Index>(structure.parameter_count()));
  for (std::size_t j = 0; j < structure.bases.size(); ++j) {
    double sum = 0.0;
    for (const auto& [a, b] : structure.bases[j]) sum += m(b, a);
    t[static_cast<Eigen::Index>(j)] = sum;
  }
  return t;
}

namespace {

void check_gmrf_inputs(const Vector& theta, const Matrix& sigma_hat,
                       const GmrfStructure& structure) {
  if (theta.size() != static_cast<Eigen::Index>(structure.parameter_count()))
    fail(ErrorKind::ShapeMismatch, "parameter vector length differs from basis count");
  if (sigma_hat.rows() != structure.dim() || sigma_hat.cols() != structure.dim())
    fail(ErrorKind::ShapeMismatch, "sample covariance does not match the grid size");
}

Matrix inverse_from(const SpdMatrix& p) {
  const Matrix& l = p.factor();
  Matrix inv = Matrix::Identity(p.size(), p.size());
  l.triangularView<Eigen::Lower>().solveInPlace(inv);
  l.transpose().triangularView<Eigen::Upper>().solveInPlace(inv);
  return 0.5 * (inv + inv.transpose());
}

// Tr(C B_j C B_l) for all j, l.
Matrix trace_products(const Matrix& c, const GmrfStructure& structure) {
  const Eigen::Index p = static_cast<Eigen::Index>(structure.parameter_count());
  const Eigen::Index n = c.rows();
  std::vector<Matrix> cb(static_cast<std::size_t>(p), Matrix::Zero(n, n));
  for (Eigen::Index j = 0; j < p; ++j)
    for (const auto& [a, b] : structure.bases[static_cast<std::size_t>(j)])
      cb[static_cast<std::size_t>(j)].col(b) += c.col(a);
  Matrix out(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index l = j; l < p; ++l) {
      const double v = (cb[static_cast<std::size_t>(j)].array() *
                        cb[static_cast<std::size_t>(l)].transpose().array())
                           .sum();
      out(j, l) = v;
      out(l, j) = v;
    }
  }
  return out;
}

}  // namespace

double gmrf_loglik(const Vector& theta, const Matrix& sigma_hat,
                   const GmrfStructure& structure, Eigen::Index N) {
  check_gmrf_inputs(theta, sigma_hat, structure);
  const SpdMatrix p = precision_assemble(structure, theta);
  const double half_n = 0.5 * static_cast<double>(N);
  const double n = static_cast<double>(structure.dim());
  return half_n * p.log_det() - half_n * theta.dot(basis_traces(structure, sigma_hat)) -
         half_n * n * kLog2Pi;
}

Vector gmrf_score(const Vector& theta, const Matrix& sigma_hat,
                  const GmrfStructure& structure, Eigen::Index N) {
  check_gmrf_inputs(theta, sigma_hat, structure);
  const Matrix c = inverse_from(precision_assemble(structure, theta));
  return 0.5 * static_cast<double>(N) *
         (basis_traces(structure, c) - basis_traces(structure, sigma_hat));
}

Matrix gmrf_hessian(const Vector& theta, const GmrfStructure& structure, Eigen::Index N) {
  const Matrix c = inverse_from(precision_assemble(structure, theta));
  return -0.5 * static_cast<double>(N) * trace_products(c, structure);
}

FitReport fit_gmrf(const Matrix& sigma_hat, const GmrfStructure& structure,
                   const std::optional<Vector>& init, const SolverOptions& options) {
  const Eigen::Index p = static_cast<Eigen::Index>(structure.parameter_count());
  Vector theta;
  if (init) {
    theta = *init;
  } else {
    const double mean_var = sigma_hat.diagonal().mean();
    if (!(mean_var > 0.0)) fail(ErrorKind::DegenerateSample, "sample covariance has zero trace");
    theta = Vector::Zero(p);
    theta[0] = 1.0 / mean_var;
  }
  check_gmrf_inputs(theta, sigma_hat, structure);
  const Vector data_traces = basis_traces(structure, sigma_hat);

  // Objective scaled by 2/N: log det P - Tr(P sigma_hat).
  const auto objective = [&](const Vector& t, SpdMatrix* out) -> std::optional<double> {
    try {
      SpdMatrix pm = precision_assemble(structure, t);
      const double value = pm.log_det() - t.dot(data_traces);
      if (out) *out = std::move(pm);
      return value;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NotPositiveDefinite) return std::nullopt;
      throw;
    }
  };

  SpdMatrix current = SpdMatrix::uncertified(Matrix::Identity(1, 1));
  std::optional<double> value = objective(theta, &current);
  if (!value) fail(ErrorKind::InfeasibleInit, "initial precision matrix is not positive definite");

  FitReport report;
  for (int it = 0;; ++it) {
    const Matrix c = inverse_from(current);
    const Vector grad = basis_traces(structure, c) - data_traces;
    report.iterations = it;
    report.residual_norm = grad.cwiseAbs().maxCoeff();
    if (report.residual_norm <= options.tolerance) break;
    if (it == options.max_iterations)
      fail(ErrorKind::NotConverged, "GMRF Newton did not converge in " +
                                        std::to_string(options.max_iterations) + " iterations");

    const Matrix info = trace_products(c, structure);
    Eigen::LDLT<Matrix> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-14 * ldlt.vectorD().maxCoeff())
      fail(ErrorKind::SingularHessian, "GMRF Hessian is singular");
    const Vector step = ldlt.solve(grad);

    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving <= options.max_halvings; ++halving, t *= 0.5) {
      const Vector trial = theta + t * step;
      SpdMatrix trial_p = SpdMatrix::uncertified(Matrix::Identity(1, 1));
      const std::optional<double> trial_value = objective(trial, &trial_p);
      if (!trial_value) continue;
      if (*trial_value >= *value - 1e-13 * (1.0 + std::abs(*value))) {
        theta = trial;
        value = trial_value;
        current = std::move(trial_p);
        accepted = true;
        break;
      }
    }
    if (!accepted)
      fail(ErrorKind::NotConverged, "GMRF line search failed at residual " +
                                        std::to_string(report.residual_norm));
  }
  // One more full step when it lowers the residual without losing likelihood.
  {
    const Matrix c = inverse_from(current);
    const Vector grad = basis_traces(structure, c) - data_traces;
    Eigen::LDLT<Matrix> ldlt(trace_products(c, structure));
    const Vector trial = theta + ldlt.solve(grad);
    SpdMatrix trial_p = SpdMatrix::uncertified(Matrix::Identity(1, 1));
    const std::optional<double> trial_value = objective(trial, &trial_p);
    if (ldlt.info() == Eigen::Success && trial_value &&
        *trial_value >= *value - 1e-13 * (1.0 + std::abs(*value))) {
      const double r = (basis_traces(structure, inverse_from(trial_p)) - data_traces).cwiseAbs().maxCoeff();
      if (r < report.residual_norm) {
        theta = trial;
        report.residual_norm = r;
      }
    }
  }
  report.params = theta;
  report.converged = true;
  return report;
}

}  // namespace nestcov
