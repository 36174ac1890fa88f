#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "nestcov/estimators.hpp"
#include "nestcov/fisher.hpp"
#include "nestcov/simulation.hpp"
#include "oracles.hpp"

using namespace nestcov;

namespace {

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::IoError;
}

SampleSet seeded(Eigen::Index n, Eigen::Index N, std::uint64_t seed) {
  return gaussian_sample(SpdMatrix::certified(Matrix::Identity(n, n)), N, seed);
}

SufficientStats noiseless(const DecayModel& m, Eigen::Index N) {
  return {decay_diagonal(m).d() * static_cast<double>(N), N};
}

double loglik_of(const DecayModel& m, const SufficientStats& st) {
  return loglik_diagonal(decay_diagonal(m), st);
}

const DecaySpectrum& grid10() {
  static const DecaySpectrum s(laplace_eigenvalues(10, 10));
  return s;
}

SufficientStats decay_sample(const DecayModel& truth, Eigen::Index N, std::uint64_t seed) {
  const SpdMatrix cov = SpdMatrix::certified(decay_diagonal(truth).dense());
  return sufficient_stats(gaussian_sample(cov, N, seed));
}

}  // namespace

TEST_SUITE("estimators") {
  TEST_CASE("sample covariance") {
    Matrix x(2, 1);
    x << 1, 2;
    Matrix expect(2, 2);
    expect << 1, 2, 2, 4;
    CHECK(sample_covariance(SampleSet(x)) == expect);
    CHECK(sample_covariance(SampleSet(Matrix::Zero(3, 4))).isZero(0.0));

    const SampleSet s = seeded(3, 5, 101);
    const Matrix c = sample_covariance(s);
    CHECK(oracle::rel_err(c, oracle::outer_sum(s.data(), 1.0 / 5)) < 1e-14);
    CHECK(c == c.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(c);
    CHECK(eig.eigenvalues().minCoeff() > -1e-14);

    // Rank is capped by N: 5 columns in dimension 8.
    const Matrix wide = sample_covariance(seeded(8, 5, 3));
    Eigen::SelfAdjointEigenSolver<Matrix> weig(wide);
    CHECK((weig.eigenvalues().array() > 1e-12).count() == 5);
  }

  TEST_CASE("unbiased sample covariance") {
    Matrix x(2, 2);
    x << 1, -1, 0, 0;
    Matrix expect(2, 2);
    expect << 2, 0, 0, 0;
    CHECK(unbiased_sample_covariance(SampleSet(x)) == expect);

    const SampleSet s = seeded(4, 6, 7);
    const Matrix u = unbiased_sample_covariance(s);
    CHECK(oracle::rel_err(u, oracle::outer_sum(s.data(), 1.0 / 5)) < 1e-14);
    CHECK(oracle::rel_err(u, sample_covariance(s) * (6.0 / 5.0)) < 1e-15);
    CHECK(kind_of([] { unbiased_sample_covariance(SampleSet(Matrix::Ones(3, 1))); }) ==
          ErrorKind::SampleTooSmall);
  }

  TEST_CASE("sufficient statistics") {
    Matrix x(2, 2);
    x << 1, -1, 1, 3;
    const SufficientStats st = sufficient_stats(SampleSet(x));
    CHECK(st.s2 == Eigen::Vector2d(2, 10));
    CHECK(st.N == 2);
    CHECK(sufficient_stats(SampleSet(Matrix::Zero(3, 2))).s2.isZero(0.0));
    const SampleSet s = seeded(6, 9, 5);
    const Vector via_cov = sample_covariance(s).diagonal() * 9.0;
    CHECK(oracle::rel_err(sufficient_stats(s).s2, via_cov) < 1e-15);
  }

  TEST_CASE("diagonal mle") {
    CHECK(diagonal_mle({Eigen::Vector2d(2, 10), 2}).d() == Eigen::Vector2d(1, 5));
    const Vector d = Eigen::Vector3d(0.3, 2.0, 7.5);
    CHECK(diagonal_mle({d * 4.0, 4}).d() == d);
    CHECK(kind_of([] { diagonal_mle({Eigen::Vector2d(1, 0), 3}); }) == ErrorKind::ZeroVariance);

    // Grid search of the likelihood over diagonal matrices, n = 2.
    Eigen::Matrix2d cov;
    cov << 1, 0, 0, 4;
    const SampleSet s = gaussian_sample(SpdMatrix::certified(cov), 30, 77);
    const SufficientStats st = sufficient_stats(s);
    const Vector mle = diagonal_mle(st).d();
    double best = -INFINITY;
    Eigen::Vector2d arg;
    for (int i = 1; i <= 400; ++i)
      for (int j = 1; j <= 400; ++j) {
        const Eigen::Vector2d g(i * 0.01, j * 0.03);
        const double v = oracle::gaussian_loglik(s.data(), g.asDiagonal().toDenseMatrix());
        if (v > best) best = v, arg = g;
      }
    CHECK(std::abs(arg[0] - mle[0]) <= 0.01);
    CHECK(std::abs(arg[1] - mle[1]) <= 0.03);
    CHECK(loglik_diagonal(diagonal_mle(st), st) >= best);
  }

  TEST_CASE("diagonal and sample-covariance diagonal coincide exactly") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const SampleSet s = seeded(7, 4 + static_cast<Eigen::Index>(seed), seed);
      CHECK(sample_covariance(s).diagonal() == diagonal_mle(sufficient_stats(s)).d());
    }
  }

  TEST_CASE("diagonal log-likelihood") {
    const SufficientStats zero{Vector::Zero(1), 1};
    CHECK(loglik_diagonal(DiagonalCovariance(Vector::Ones(1)), zero) ==
          doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-15));

    // Matches the dense density summed over columns.
    const SampleSet s = seeded(5, 8, 12);
    const Vector d = Eigen::VectorXd::LinSpaced(5, 0.5, 3.0);
    CHECK(loglik_diagonal(DiagonalCovariance(d), sufficient_stats(s)) ==
          doctest::Approx(oracle::gaussian_loglik(s.data(), d.asDiagonal().toDenseMatrix()))
              .epsilon(1e-12));

    // Coordinate-wise golden-section maximum at S^2 / N.
    const SufficientStats st = sufficient_stats(s);
    const Vector mle = diagonal_mle(st).d();
    for (Eigen::Index j = 0; j < 5; ++j) {
      const double arg = oracle::golden_max(
          [&](double dj) {
            Vector v = mle;
            v[j] = dj;
            return loglik_diagonal(DiagonalCovariance(v), st);
          },
          1e-3, 20.0, 1e-12);
      CHECK(arg == doctest::Approx(mle[j]).epsilon(1e-6));
    }

    // Shifting every tau by a constant changes the value per the formula.
    const Vector tau = d.cwiseInverse();
    const double base = loglik_diagonal(DiagonalCovariance(d), st);
    const double shifted =
        loglik_diagonal(DiagonalCovariance((tau.array() + 0.25).inverse().matrix()), st);
    const double expect = base + 0.5 * 8 * ((tau.array() + 0.25).log() - tau.array().log()).sum() -
                          0.5 * 0.25 * st.s2.sum();
    CHECK(shifted == doctest::Approx(expect).epsilon(1e-13));
  }

  TEST_CASE("two-parameter decay fit") {
    const DecaySpectrum& spectrum = grid10();
    for (auto [c, a] : {std::pair{30.0, 0.002}, {1.0, 0.0}, {0.5, -0.001}, {200.0, 0.004}}) {
      const FitReport r = fit_decay2(noiseless(DecayModel::two_param(spectrum, c, a), 10), spectrum);
      CHECK(r.converged);
      CHECK(r.residual_norm <= 1e-10);
      CHECK(r.params[0] == doctest::Approx(c).epsilon(1e-9));
      CHECK(std::abs(r.params[1] - a) <= 1e-9 * (std::abs(a) + 1e-3));
    }
    CHECK(kind_of([] { DecaySpectrum(Vector::Constant(4, -3.0)); }) == ErrorKind::InvalidArgument);

    Vector lonely = Vector::Zero(100);
    lonely[3] = 1.0;
    CHECK(kind_of([&] { fit_decay2({lonely, 5}, spectrum); }) == ErrorKind::NoBracket);
  }

  TEST_CASE("two-parameter fit maximizes the profile likelihood") {
    const DecaySpectrum& spectrum = grid10();
    const DecayModel truth = DecayModel::two_param(spectrum, 30.0, 0.002);
    const SufficientStats st = decay_sample(truth, 20, 2024);
    const FitReport r = fit_decay2(st, spectrum);
    const auto profile = [&](double a) {
      // Closed-form c for fixed alpha, evaluated independently.
      double acc = 0.0;
      for (Eigen::Index i = 0; i < 100; ++i)
        acc += st.s2[i] / 20.0 * std::exp(-a * spectrum.lambda()[i]);
      const double c = 100.0 / acc;
      return loglik_of(DecayModel::two_param(spectrum, c, a), st);
    };
    const double arg = oracle::grid_then_golden(profile, -0.01, 0.01, 2000);
    CHECK(std::abs(arg - r.params[1]) < 1e-4);
    CHECK(std::abs(arg - r.params[1]) < 1e-7);
  }

  TEST_CASE("three-parameter score") {
    const DecaySpectrum& spectrum = grid10();
    const DecayModel truth = DecayModel::three_param(spectrum, 30.0, 0.5, 0.002);
    const Eigen::Vector3d at(30.0, 0.5, 0.002);
    CHECK(decay_score3(at, noiseless(truth, 15), spectrum).cwiseAbs().maxCoeff() < 1e-12);

    const SufficientStats st = decay_sample(truth, 15, 5);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double hmax = spectrum.h().maxCoeff();
    for (int k = 0; k < 50; ++k) {
      const double c1 = 5.0 + 55.0 * u(rng);
      const Eigen::Vector3d p(c1, -0.4 * c1 / hmax + (1.0 + 0.4 * c1 / hmax) * u(rng),
                              -0.002 + 0.006 * u(rng));
      const Vector fd = oracle::fd_gradient(
          [&](const Vector& q) {
            return loglik_of(DecayModel::three_param(spectrum, q[0], q[1], q[2]), st);
          },
          p);
      CHECK(oracle::rel_err_each(decay_score3(p, st, spectrum), fd * (2.0 / 15.0)) < 1e-5);
      const Matrix jfd = oracle::fd_jacobian(
          [&](const Vector& q) { return Vector(decay_score3(q, st, spectrum)); }, p);
      const Matrix jac = decay_score3_jacobian(p, st, spectrum);
      CHECK(oracle::rel_err_each(jac, jfd) < 1e-4);
      CHECK(jac == jac.transpose());
    }
    CHECK(kind_of([&] { decay_score3({1.0, -1.0, 0.0}, st, spectrum); }) ==
          ErrorKind::InfeasibleParams);
  }

  TEST_CASE("three-parameter fit: noiseless recovery") {
    const DecaySpectrum& spectrum = grid10();
    const FitReport r = fit_decay3(noiseless(DecayModel::three_param(spectrum, 30, 0.5, 0.002), 20), spectrum);
    CHECK(r.converged);
    CHECK(r.residual_norm < 1e-8);
    CHECK(oracle::rel_err_each(r.params, Eigen::Vector3d(30, 0.5, 0.002), 0.0) < 1e-6);

    const FitReport flat = fit_decay3(noiseless(DecayModel::two_param(spectrum, 30, 0.002), 20), spectrum);
    CHECK(std::abs(flat.params[1]) * spectrum.h().maxCoeff() / flat.params[0] < 1e-6);
    CHECK(flat.params[0] == doctest::Approx(30).epsilon(1e-6));

    CHECK(kind_of([&] {
            fit_decay3(noiseless(DecayModel::two_param(spectrum, 30, 0.002), 20), spectrum,
                       Eigen::Vector3d(1.0, -1.0, 0.0));
          }) == ErrorKind::InfeasibleInit);
  }

  TEST_CASE("three-parameter fit is a local maximum and nests the others") {
    const DecaySpectrum& spectrum = grid10();
    const DecayModel truth = DecayModel::two_param(spectrum, 30, 0.002);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    int moved = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const SufficientStats st = decay_sample(truth, 5 + 5 * (seed % 4), 900 + seed);
      const FitReport two = fit_decay2(st, spectrum);
      const FitReport three = fit_decay3(st, spectrum);
      CHECK(three.residual_norm <= 1e-8);
      const double l1 = loglik_diagonal(diagonal_mle(st), st);
      const double l2 = loglik_of(DecayModel::two_param(spectrum, two.params[0], two.params[1]), st);
      const Eigen::Vector3d p = three.params;
      const double l3 = loglik_decay3(p, st, spectrum);
      CHECK(l1 >= l3);
      CHECK(l3 >= l2 - 1e-9 * std::abs(l2));
      if (std::abs(p[1]) * spectrum.h().maxCoeff() > 1e-8 * p[0]) ++moved;
      for (int k = 0; k < 30; ++k) {
        const Eigen::Vector3d q =
            p + 1e-3 * Eigen::Vector3d(p[0] * z(rng), 1e-2 * z(rng), 1e-4 * z(rng));
        if ((q[0] + q[1] * spectrum.h().array()).minCoeff() <= 0.0) continue;
        CHECK(loglik_decay3(q, st, spectrum) <= l3 + 1e-9 * std::abs(l3));
      }
    }
    // The boundary c2 = 0 is a one-sided optimum: roughly half the samples leave it.
    CHECK(moved >= 8);
    CHECK(moved <= 32);
  }

  TEST_CASE("pointwise dominance of the unbiased diagonal") {
    // diag(S_u) removes the off-diagonal part of S_u - D: always smaller.
    std::mt19937_64 rng(5);
    for (Eigen::Index n : {1, 2, 5, 30}) {
      const Vector d = Vector::LinSpaced(n, 0.2, 2.0);
      const SpdMatrix cov = SpdMatrix::certified(d.asDiagonal().toDenseMatrix());
      for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const SampleSet s = gaussian_sample(cov, 2 + static_cast<Eigen::Index>(seed % 7), seed);
        const Matrix su = unbiased_sample_covariance(s);
        const Matrix dm = d.asDiagonal();
        const Matrix diag_su = su.diagonal().asDiagonal();
        CHECK(frobenius_error(diag_su, dm) <= frobenius_error(su, dm));
      }
    }
  }

  TEST_CASE("biased diagonal dominance can fail in one dimension") {
    // s = d (N - 1) / N puts the unbiased estimate exactly on the truth.
    const Matrix x = Matrix::Constant(1, 4, std::sqrt(3.0 / 4.0));
    const SampleSet s(x);
    const Matrix one = Matrix::Ones(1, 1);
    CHECK(frobenius_error(sample_covariance(s), one) > frobenius_error(unbiased_sample_covariance(s), one));
  }

  TEST_CASE("gmrf log-likelihood") {
    const GmrfStructure n4 = gmrf_structure(4, 3, NeighborLevel::N4);
    const GmrfStructure n8 = gmrf_structure(4, 3, NeighborLevel::N8);
    const double n = 12.0;
    CHECK(gmrf_loglik(Eigen::Vector3d(1, 0, 0), Matrix::Identity(12, 12), n4, 7) ==
          doctest::Approx(-3.5 * (n + n * std::log(2.0 * std::numbers::pi))).epsilon(1e-14));

    const Eigen::Vector3d theta(2.0, -0.3, 0.4);
    const Matrix sigma = precision_matrix(n4, theta).inverse();
    const SampleSet s = gaussian_sample(SpdMatrix::certified(0.5 * (sigma + sigma.transpose())), 9, 4);
    const Matrix shat = sample_covariance(s);
    Vector theta8 = Vector::Zero(5);
    theta8.head(3) = theta;
    CHECK(gmrf_loglik(theta8, shat, n8, 9) ==
          doctest::Approx(gmrf_loglik(theta, shat, n4, 9)).epsilon(1e-14));
    CHECK(gmrf_loglik(theta, shat, n4, 9) ==
          doctest::Approx(oracle::gaussian_loglik(s.data(), sigma)).epsilon(1e-11));
    CHECK(kind_of([&] { gmrf_loglik(Eigen::Vector3d(0.1, -0.2, 0.5), shat, n4, 9); }) ==
          ErrorKind::NotPositiveDefinite);
  }

  TEST_CASE("gmrf score and hessian") {
    const GmrfStructure n4 = gmrf_structure(10, 10, NeighborLevel::N4);
    CHECK(gmrf_score(Eigen::Vector3d(1, 0, 0), Matrix::Identity(100, 100), n4, 5).isZero(0.0));
    const Matrix h0 = gmrf_hessian(Eigen::Vector3d(1, 0, 0), n4, 5);
    CHECK(h0(0, 0) == doctest::Approx(-2.5 * 100));

    const Eigen::Vector3d truth(5, -0.2, 0.5);
    const Matrix pop = precision_matrix(n4, truth).inverse();
    CHECK(gmrf_score(truth, pop, n4, 20).cwiseAbs().maxCoeff() < 1e-10);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gmrf_hessian(truth, n4, 20));
    CHECK(eig.eigenvalues().maxCoeff() < 0.0);

    const GmrfStructure n12 = gmrf_structure(5, 4, NeighborLevel::N12);
    Vector t12(7);
    t12 << 4, -0.3, 0.4, 0.1, -0.1, 0.05, 0.02;
    const Matrix sigma = precision_matrix(n12, t12).inverse();
    const Matrix shat = sample_covariance(gaussian_sample(SpdMatrix::certified(0.5 * (sigma + sigma.transpose())), 12, 8));
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 50; ++k) {
      Vector th = t12;
      th[0] += 0.5 * u(rng);
      for (int j = 1; j < 7; ++j) th[j] += 0.15 * u(rng);
      const Vector fd = oracle::fd_gradient([&](const Vector& q) { return gmrf_loglik(q, shat, n12, 12); }, th);
      CHECK(oracle::rel_err_each(gmrf_score(th, shat, n12, 12), fd) < 1e-5);
      const Matrix hfd = oracle::fd_jacobian([&](const Vector& q) { return gmrf_score(q, shat, n12, 12); }, th, 1e-4);
      const Matrix hes = gmrf_hessian(th, n12, 12);
      CHECK(oracle::rel_err_each(hes, hfd) < 1e-4);
      CHECK((hes - hes.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  TEST_CASE("gmrf fit: population input and nesting") {
    const GmrfStructure n4 = gmrf_structure(10, 10, NeighborLevel::N4);
    const GmrfStructure n8 = gmrf_structure(10, 10, NeighborLevel::N8);
    const Eigen::Vector3d truth(5, -0.2, 0.5);
    const Matrix pop = precision_matrix(n4, truth).inverse();
    const FitReport r = fit_gmrf(pop, n4);
    CHECK(r.converged);
    CHECK(oracle::rel_err_each(r.params, truth, 0.0) < 1e-7);

    const Matrix shat = sample_covariance(gaussian_sample(SpdMatrix::certified(0.5 * (pop + pop.transpose())), 30, 6));
    const FitReport f4 = fit_gmrf(shat, n4);
    const FitReport f8 = fit_gmrf(shat, n8);
    CHECK(gmrf_loglik(f8.params, shat, n8, 30) >= gmrf_loglik(f4.params, shat, n4, 30));
    CHECK(std::abs(f8.params[3]) < 0.1);
    CHECK(std::abs(f8.params[4]) < 0.1);
    CHECK(kind_of([&] { fit_gmrf(shat, n4, Vector(Eigen::Vector3d(0.1, -0.2, 0.5))); }) ==
          ErrorKind::InfeasibleInit);
  }

  TEST_CASE("gmrf fit within three standard errors at N = 55") {
    const GmrfStructure n4 = gmrf_structure(10, 10, NeighborLevel::N4);
    const Eigen::Vector3d truth(5, -0.2, 0.5);
    const Matrix pop = precision_matrix(n4, truth).inverse();
    const Matrix shat = sample_covariance(gaussian_sample(SpdMatrix::certified(0.5 * (pop + pop.transpose())), 55, 55));
    const FitReport r = fit_gmrf(shat, n4);
    CHECK(gmrf_score(r.params, shat, n4, 55).cwiseAbs().maxCoeff() / 27.5 <= 1e-8);
    const Matrix cov = fisher_gmrf(truth, n4).matrix.inverse() / 55.0;
    for (int j = 0; j < 3; ++j) CHECK(std::abs(r.params[j] - truth[j]) <= 3.0 * std::sqrt(cov(j, j)));
  }
}
