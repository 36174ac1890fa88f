#pragma once

#include <optional>

#include "nestcov/model.hpp"

namespace nestcov {

/// Column sums of squares S_j^2 = sum_k (X_j^(k))^2 and the sample size.
struct SufficientStats {
  Vector s2;
  Eigen::Index N = 0;
};

struct FitReport {
  Vector params;
  int iterations = 0;
  /// Max-norm of the estimating-equation residuals at `params`.
  double residual_norm = 0.0;
  bool converged = false;
};

struct SolverOptions {
  double tolerance = 1e-8;
  int max_iterations = 200;
  int max_halvings = 50;
};

Matrix sample_covariance(const SampleSet& sample);

/// Requires N >= 2 (SampleTooSmall otherwise).
Matrix unbiased_sample_covariance(const SampleSet& sample);

SufficientStats sufficient_stats(const SampleSet& sample);

/// d_j = S_j^2 / N. Throws ZeroVariance if some S_j^2 == 0.
DiagonalCovariance diagonal_mle(const SufficientStats& stats);

/// Gaussian log-likelihood of diag(d) written in terms of tau = 1/d and S^2.
double loglik_diagonal(const DiagonalCovariance& d, const SufficientStats& stats);

/// Two-parameter decay fit, params = (c, alpha).
///
/// alpha solves the profiled equation sum_i S_i^2 f_i(alpha) (h_i - mean h) = 0,
/// located by an expanding bracket from alpha = 0 followed by bisection and
/// safeguarded Newton polishing; c follows in closed form. The reported
/// residual is the larger of two scale-free forms of the equations:
/// the weighted mean of (h_i - mean h) with weights S_i^2 f_i, divided by the
/// spread of h, and 1 - c * mean(S_i^2 f_i / N).
///
/// Throws NoBracket if the residual has no sign change for |alpha| <= 1e3.
FitReport fit_decay2(const SufficientStats& stats, const DecaySpectrum& spectrum,
                     double tolerance = 1e-10);

/// Left-hand sides of the three estimating equations of the (c1, c2, alpha)
/// model, in that order. Each equals (2/N) times the corresponding partial
/// derivative of the log-likelihood. Throws InfeasibleParams when some
/// c1 + c2 h_i <= 0.
Eigen::Vector3d decay_score3(const Eigen::Vector3d& params, const SufficientStats& stats,
                             const DecaySpectrum& spectrum);

/// Jacobian of decay_score3 with respect to (c1, c2, alpha); symmetric.
Eigen::Matrix3d decay_score3_jacobian(const Eigen::Vector3d& params,
                                      const SufficientStats& stats,
                                      const DecaySpectrum& spectrum);

/// Log-likelihood of the (c1, c2, alpha) model.
double loglik_decay3(const Eigen::Vector3d& params, const SufficientStats& stats,
                     const DecaySpectrum& spectrum);

/// Damped Newton solve of decay_score3 = 0. Default start is (c, 0, alpha)
/// from fit_decay2, which always solves the equations. When a solution has
/// c2 = 0 and the likelihood increases along the second-order curve
/// d_i (1 + t h_i^2), t > 0, the solve restarts on both sides of c2 = 0 and
/// keeps the higher likelihood. Throws InfeasibleInit or NotConverged.
FitReport fit_decay3(const SufficientStats& stats, const DecaySpectrum& spectrum,
                     const std::optional<Eigen::Vector3d>& init = {},
                     const SolverOptions& options = {});

/// t_j = Tr(M B_j) for every basis of `structure`.
Vector basis_traces(const GmrfStructure& structure, const Matrix& m);

double gmrf_loglik(const Vector& theta, const Matrix& sigma_hat,
                   const GmrfStructure& structure, Eigen::Index N);

/// Component j = (N/2) [Tr(P^-1 B_j) - Tr(sigma_hat B_j)].
Vector gmrf_score(const Vector& theta, const Matrix& sigma_hat,
                  const GmrfStructure& structure, Eigen::Index N);

/// Entry (j, l) = -(N/2) Tr(P^-1 B_j P^-1 B_l).
Matrix gmrf_hessian(const Vector& theta, const GmrfStructure& structure, Eigen::Index N);

/// Newton fit of the precision parameters to a sample covariance. The
/// residual is max_j |Tr(P^-1 B_j) - Tr(sigma_hat B_j)|, the score divided by
/// N/2, so the fit does not depend on N.
FitReport fit_gmrf(const Matrix& sigma_hat, const GmrfStructure& structure,
                   const std::optional<Vector>& init = {},
                   const SolverOptions& options = {});

}  // namespace nestcov
