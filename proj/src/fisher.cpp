#include "nestcov/fisher.hpp"

#include "nestcov/estimators.hpp"

namespace nestcov {

namespace {

Eigen::Index numeric_rank(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric, Eigen::EigenvaluesOnly);
  const Vector& values = eig.eigenvalues();
  const double top = values.cwiseAbs().maxCoeff();
  if (top == 0.0) return 0;
  return (values.array() > 1e-10 * top).count();
}

}  // namespace

FisherInfo fisher_diag(const DiagonalCovariance& d) {
  FisherInfo info;
  info.matrix = (0.5 * d.tau().array().square()).matrix().asDiagonal();
  for (Eigen::Index i = 0; i < d.size(); ++i) info.labels.push_back("d" + std::to_string(i + 1));
  return info;
}

FisherInfo fisher_decay2(const DecayModel& model) {
  if (model.c2() != 0.0)
    fail(ErrorKind::InvalidArgument, "two-parameter information needs c2 == 0");
  const Vector& h = model.spectrum().h();  // f_i'/f_i = -lambda_i = h_i
  const double c = model.c1();
  const double n = static_cast<double>(h.size());
  FisherInfo info;
  info.matrix.resize(2, 2);
  info.matrix(0, 0) = n / (2.0 * c * c);
  info.matrix(0, 1) = info.matrix(1, 0) = h.sum() / (2.0 * c);
  info.matrix(1, 1) = 0.5 * h.squaredNorm();
  info.labels = {"c", "alpha"};
  return info;
}

FisherInfo fisher_decay3(const DecayModel& model) {
  const Vector& h = model.spectrum().h();
  const Eigen::ArrayXd u = model.c1() + model.c2() * h.array();
  const Eigen::ArrayXd hv = h.array();
  FisherInfo info;
  info.matrix.resize(3, 3);
  info.matrix(0, 0) = 0.5 * (1.0 / u.square()).sum();
  info.matrix(0, 1) = 0.5 * (hv / u.square()).sum();
  info.matrix(1, 1) = 0.5 * (hv.square() / u.square()).sum();
  info.matrix(0, 2) = 0.5 * (hv / u).sum();
  info.matrix(1, 2) = 0.5 * (hv.square() / u).sum();
  info.matrix(2, 2) = 0.5 * hv.square().sum();
  info.matrix(1, 0) = info.matrix(0, 1);
  info.matrix(2, 0) = info.matrix(0, 2);
  info.matrix(2, 1) = info.matrix(1, 2);
  info.labels = {"c1", "c2", "alpha"};
  return info;
}

FisherInfo fisher_gmrf(const Vector& theta, const GmrfStructure& structure) {
  FisherInfo info;
  info.matrix = -gmrf_hessian(theta, structure, 1);
  for (std::size_t j = 0; j < structure.parameter_count(); ++j)
    info.labels.push_back("theta" + std::to_string(j + 1));
  return info;
}

Matrix decay_jacobian(const DecayModel& model) {
  const Vector& h = model.spectrum().h();
  const Vector d = decay_diagonal(model).d();
  const Eigen::ArrayXd u = model.c1() + model.c2() * h.array();
  if (model.family() == DecayFamily::TwoParam) {
    Matrix g(h.size(), 2);
    g.col(0) = -d / model.c1();
    g.col(1) = -(d.array() * h.array()).matrix();  // lambda_i d_i
    return g;
  }
  Matrix g(h.size(), 3);
  g.col(0) = -(d.array() / u).matrix();
  g.col(1) = -(d.array() * h.array() / u).matrix();
  g.col(2) = -(d.array() * h.array()).matrix();
  return g;
}

ProjectedCov projected_cov(const FisherInfo& ambient, const Matrix& jacobian) {
  if (ambient.matrix.rows() != jacobian.rows())
    fail(ErrorKind::ShapeMismatch, "Jacobian rows differ from information size");
  const Matrix sub = jacobian.transpose() * ambient.matrix * jacobian;
  // Columns of G can differ by many orders of magnitude; judge invertibility
  // on the unit-diagonal form so the test is invariant to parameter scaling.
  const Vector diag = sub.diagonal();
  if (!(diag.minCoeff() > 0.0) || !diag.allFinite())
    fail(ErrorKind::SingularInformation, "sub-model information matrix is singular");
  const Vector scale = diag.cwiseSqrt().cwiseInverse();
  const Matrix unit = scale.asDiagonal() * sub * scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (unit + unit.transpose()));
  const Vector& mu = eig.eigenvalues();
  if (eig.info() != Eigen::Success || !(mu.minCoeff() > 1e-12 * mu.maxCoeff()))
    fail(ErrorKind::SingularInformation, "sub-model information matrix is singular");
  const Matrix v_g = jacobian * scale.asDiagonal() * eig.eigenvectors();
  Matrix q = v_g * mu.cwiseInverse().asDiagonal() * v_g.transpose();
  q = 0.5 * (q + q.transpose());
  ProjectedCov out;
  out.rank = numeric_rank(q);
  out.matrix = std::move(q);
  return out;
}

ProjectedCov decay3_asymptotic_cov(const DecayModel& model) {
  const DiagonalCovariance d = decay_diagonal(model);
  const FisherInfo ambient = fisher_diag(d);
  if (model.family() == DecayFamily::ThreeParam && model.c2() != 0.0)
    return projected_cov(ambient, decay_jacobian(model));

  // At c2 = 0 the c2 and alpha columns of G are parallel. The reachable set is
  // the half-space spanned by the two-parameter tangent plus t * d o h^2,
  // t >= 0, so the limit law is the projection of a Gaussian onto that cone.
  // Its second moment averages the plane and the full-span projections.
  const DecayModel two = DecayModel::two_param(model.spectrum(), model.c1(), model.alpha());
  const Matrix g2 = decay_jacobian(two);
  Matrix cone(g2.rows(), 3);
  cone << g2, (d.d().array() * model.spectrum().h().array().square()).matrix();
  const ProjectedCov plane = projected_cov(ambient, g2);
  if (g2.rows() <= 2) return plane;
  const ProjectedCov full = projected_cov(ambient, cone);
  ProjectedCov out;
  out.matrix = 0.5 * (plane.matrix + full.matrix);
  out.rank = full.rank;
  return out;
}

double asymptotic_mse(const ProjectedCov& q, Eigen::Index N) {
  if (N < 1) fail(ErrorKind::InvalidArgument, "sample size must be positive");
  return q.matrix.trace() / static_cast<double>(N);
}

PsdOrder psd_order_check(const ProjectedCov& small, const ProjectedCov& big) {
  if (small.matrix.rows() != big.matrix.rows() || small.matrix.cols() != big.matrix.cols())
    fail(ErrorKind::ShapeMismatch, "projected covariances differ in size");
  const Matrix diff = big.matrix - small.matrix;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (diff + diff.transpose()),
                                            Eigen::EigenvaluesOnly);
  PsdOrder out;
  out.min_eigenvalue = eig.eigenvalues().minCoeff();
  out.ordered = out.min_eigenvalue >= -1e-8;
  return out;
}

NestedDecayCovariances nested_decay_covariances(const DecaySpectrum& spectrum, double c,
                                                double alpha) {
  const DecayModel two = DecayModel::two_param(spectrum, c, alpha);
  const DecayModel three = DecayModel::three_param(spectrum, c, 0.0, alpha);
  const FisherInfo ambient = fisher_diag(decay_diagonal(two));
  const Eigen::Index n = spectrum.size();
  return {projected_cov(ambient, Matrix::Identity(n, n)),
          decay3_asymptotic_cov(three),
          projected_cov(ambient, decay_jacobian(two))};
}

}  // namespace nestcov
