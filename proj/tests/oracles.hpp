#pragma once
// Independent reference computations used only by the tests. Each one avoids
// the code path it checks: plain loops instead of Eigen reductions, dense
// densities instead of sufficient statistics, numeric search instead of
// closed forms.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix outer_sum(const Matrix& x, double scale) {
  const auto n = x.rows();
  Matrix out = Matrix::Zero(n, n);
  for (Eigen::Index k = 0; k < x.cols(); ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) out(i, j) += x(i, k) * x(j, k);
  return out * scale;
}

inline double frobenius_sq(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) s += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
  return s;
}

/// Mean, then squared deviations about it.
inline std::pair<double, double> two_pass(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return {mean, sd / std::sqrt(static_cast<double>(v.size()))};
}

/// Maximizer of a unimodal f on [lo, hi].
inline double golden_max(const std::function<double(double)>& f, double lo, double hi,
                         double tol = 1e-12) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = f(x1);
    }
  }
  return 0.5 * (a + b);
}

/// Grid argmax followed by golden refinement on the neighbouring cells.
inline double grid_then_golden(const std::function<double(double)>& f, double lo, double hi,
                               int points) {
  int best = 0;
  double best_v = -INFINITY;
  for (int i = 0; i <= points; ++i) {
    const double x = lo + (hi - lo) * i / points;
    const double v = f(x);
    if (v > best_v) best_v = v, best = i;
  }
  const double step = (hi - lo) / points;
  return golden_max(f, lo + step * std::max(best - 1, 0), lo + step * std::min(best + 1, points));
}

/// Central differences of a scalar function, relative step per coordinate.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                          double rel = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = rel * std::max(std::abs(x[j]), 1e-3);
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    g[j] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x,
                          double rel = 1e-6) {
  const Vector f0 = f(x);
  Matrix jac(f0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = rel * std::max(std::abs(x[j]), 1e-3);
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    jac.col(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return jac;
}

/// max |a - b| / max |b|.
inline double rel_err(const Matrix& a, const Matrix& b) {
  const double scale = b.cwiseAbs().maxCoeff();
  return (a - b).cwiseAbs().maxCoeff() / (scale > 0 ? scale : 1.0);
}

/// Componentwise relative error, with entries smaller than floor * max|b|
/// judged against that floor instead.
inline double rel_err_each(const Matrix& a, const Matrix& b, double floor = 1e-8) {
  const double scale = std::max(b.cwiseAbs().maxCoeff() * floor, 1e-300);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / std::max(std::abs(b(i, j)), scale));
  return worst;
}

/// Sum over columns of the N(0, cov) log-density, via LU inverse and determinant.
inline double gaussian_loglik(const Matrix& x, const Matrix& cov) {
  Eigen::PartialPivLU<Matrix> lu(cov);
  const Matrix inv = lu.inverse();
  const double logdet = std::log(lu.determinant());
  const double n = static_cast<double>(cov.rows());
  double total = 0.0;
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    const Vector col = x.col(k);
    total += -0.5 * (n * std::log(2.0 * std::numbers::pi) + logdet + col.dot(inv * col));
  }
  return total;
}

/// Stationary point of sum_i [-log m_i - l_i / m_i] over clipped spectra:
/// tau = (sum_{l_i < tau} l_i + sum_{l_i > kappa tau} l_i / kappa) / (#low + #high),
/// found by trying every consistent split of the sorted eigenvalues.
inline double won_tau(std::vector<double> l, double kappa) {
  std::sort(l.begin(), l.end());
  const std::size_t n = l.size();
  double best_tau = 0.0, best_v = -INFINITY;
  auto value = [&](double tau) {
    double v = 0.0;
    for (double li : l) {
      const double m = std::clamp(li, tau, kappa * tau);
      v += -std::log(m) - li / m;
    }
    return v;
  };
  for (std::size_t lo = 0; lo <= n; ++lo)
    for (std::size_t hi = 0; lo + hi <= n; ++hi) {
      if (lo + hi == 0) continue;
      double s = 0.0;
      for (std::size_t i = 0; i < lo; ++i) s += l[i];
      for (std::size_t i = n - hi; i < n; ++i) s += l[i] / kappa;
      const double tau = s / static_cast<double>(lo + hi);
      if (!(tau > 0.0)) continue;
      const double v = value(tau);
      if (v > best_v) best_v = v, best_tau = tau;
    }
  return best_tau;
}

/// Kronecker-form information (1/2) G^T (C kron C) G of a covariance
/// parameterization, with G the n^2 x p Jacobian of vec(Sigma).
inline Matrix kronecker_information(const Matrix& sigma, const Matrix& vec_jacobian) {
  const Matrix c = sigma.inverse();
  const auto n = c.rows();
  Matrix kron(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) kron.block(i * n, j * n, n, n) = c(i, j) * c;
  return 0.5 * vec_jacobian.transpose() * kron * vec_jacobian;
}

}  // namespace oracle
