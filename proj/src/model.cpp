#include "nestcov/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace nestcov {

namespace {

bool is_symmetric(const Matrix& a) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

}  // namespace

SampleSet::SampleSet(Matrix data, std::optional<std::uint64_t> seed)
    : data_(std::move(data)), seed_(seed) {
  if (data_.rows() < 1 || data_.cols() < 1)
    fail(ErrorKind::InvalidArgument, "sample needs n >= 1 rows and N >= 1 columns");
  if (!data_.allFinite())
    fail(ErrorKind::InvalidArgument, "sample contains non-finite entries");
}

SampleSet SampleSet::select(const std::vector<Eigen::Index>& columns) const {
  Matrix out(dim(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) out.col(j) = data_.col(columns[j]);
  return SampleSet(std::move(out), seed_);
}

SpdMatrix SpdMatrix::certified(Matrix values) {
  if (!is_symmetric(values))
    fail(ErrorKind::InvalidArgument, "matrix is not symmetric");
  Eigen::LLT<Matrix> llt(values);
  if (llt.info() != Eigen::Success)
    fail(ErrorKind::NotPositiveDefinite, "Cholesky factorization failed");
  Matrix factor = llt.matrixL();
  if (!(factor.diagonal().array() > 0.0).all() || !factor.allFinite())
    fail(ErrorKind::NotPositiveDefinite, "Cholesky factor has a non-positive pivot");
  return SpdMatrix(std::move(values), std::move(factor));
}

SpdMatrix SpdMatrix::uncertified(Matrix values) {
  if (!is_symmetric(values))
    fail(ErrorKind::InvalidArgument, "matrix is not symmetric");
  return SpdMatrix(std::move(values), std::nullopt);
}

const Matrix& SpdMatrix::factor() const {
  if (!factor_) fail(ErrorKind::NotPositiveDefinite, "matrix carries no certificate");
  return *factor_;
}

double SpdMatrix::log_det() const {
  return 2.0 * factor().diagonal().array().log().sum();
}

DiagonalCovariance::DiagonalCovariance(Vector d) : d_(std::move(d)) {
  if (d_.size() < 1) fail(ErrorKind::InvalidArgument, "empty diagonal");
  if (!d_.allFinite() || !(d_.array() > 0.0).all())
    fail(ErrorKind::NonPositiveVariance, "variances must be finite and positive");
  tau_ = d_.cwiseInverse();
}

DecaySpectrum::DecaySpectrum(Vector lambda) : lambda_(std::move(lambda)) {
  if (lambda_.size() < 1) fail(ErrorKind::InvalidArgument, "empty spectrum");
  if (!lambda_.allFinite() || !(lambda_.array() < 0.0).all())
    fail(ErrorKind::InvalidArgument, "Laplace eigenvalues must be finite and strictly negative");
  if (lambda_.size() >= 2 && lambda_.maxCoeff() == lambda_.minCoeff())
    fail(ErrorKind::InvalidArgument, "all eigenvalues equal: decay rate is not identifiable");
  h_ = -lambda_;
}

DecayModel::DecayModel(DecaySpectrum spectrum, DecayFamily family, double c1,
                       double c2, double alpha)
    : spectrum_(std::move(spectrum)), family_(family), c1_(c1), c2_(c2), alpha_(alpha) {
  if (!std::isfinite(c1) || !std::isfinite(c2) || !std::isfinite(alpha))
    fail(ErrorKind::InvalidArgument, "decay parameters must be finite");
  const Vector& h = spectrum_.h();
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    if (c1_ + c2_ * h[i] <= 0.0)
      fail(ErrorKind::NonPositiveVariance,
           "c1 + c2 h_i must be positive for every i (fails at i = " + std::to_string(i) + ")");
  }
}

DecayModel DecayModel::two_param(DecaySpectrum spectrum, double c, double alpha) {
  return DecayModel(std::move(spectrum), DecayFamily::TwoParam, c, 0.0, alpha);
}

DecayModel DecayModel::three_param(DecaySpectrum spectrum, double c1, double c2,
                                   double alpha) {
  return DecayModel(std::move(spectrum), DecayFamily::ThreeParam, c1, c2, alpha);
}

Vector DecayModel::params() const {
  if (family_ == DecayFamily::TwoParam) return Vector{{c1_, alpha_}};
  return Vector{{c1_, c2_, alpha_}};
}

Vector DecayModel::precisions() const {
  const Vector& h = spectrum_.h();
  return ((c1_ + c2_ * h.array()) * (alpha_ * h.array()).exp()).matrix();
}

std::string_view to_string(NeighborLevel level) noexcept {
  switch (level) {
    case NeighborLevel::N4: return "N4";
    case NeighborLevel::N8: return "N8";
    case NeighborLevel::N12: return "N12";
  }
  return "N?";
}

int basis_count(NeighborLevel level) noexcept {
  switch (level) {
    case NeighborLevel::N4: return 3;
    case NeighborLevel::N8: return 5;
    case NeighborLevel::N12: return 7;
  }
  return 0;
}

Vector laplace_eigenvalues(Eigen::Index m, Eigen::Index k) {
  if (m < 1 || k < 1) fail(ErrorKind::InvalidArgument, "grid dimensions must be positive");
  const double pi = std::numbers::pi;
  const auto axis = [pi](Eigen::Index size, Eigen::Index j) {
    const double s = std::sin(static_cast<double>(j) * pi / (2.0 * static_cast<double>(size + 1)));
    const double inv_h = static_cast<double>(size + 1);
    return 4.0 * inv_h * inv_h * s * s;
  };
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(m * k));
  for (Eigen::Index l = 1; l <= k; ++l)
    for (Eigen::Index j = 1; j <= m; ++j) values.push_back(-(axis(m, j) + axis(k, l)));
  std::sort(values.begin(), values.end(), std::greater<>());
  return Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

DiagonalCovariance decay_diagonal(const DecayModel& model) {
  return DiagonalCovariance(model.precisions().cwiseInverse());
}

GmrfStructure gmrf_structure(Eigen::Index m, Eigen::Index k, NeighborLevel level) {
  if (m < 3 || k < 3)
    fail(ErrorKind::GridTooSmall, "GMRF grid needs at least 3 x 3 nodes");

  GmrfStructure s;
  s.rows = m;
  s.cols = k;
  s.level = level;
  const auto index = [m](Eigen::Index r, Eigen::Index c) { return c * m + r; };

  // One basis per neighbor offset (dr, dc); both orientations are stored.
  const auto offset_basis = [&](Eigen::Index dr, Eigen::Index dc) {
    std::vector<IndexPair> pairs;
    for (Eigen::Index c = 0; c < k; ++c) {
      for (Eigen::Index r = 0; r < m; ++r) {
        const Eigen::Index r2 = r + dr;
        const Eigen::Index c2 = c + dc;
        if (r2 < 0 || r2 >= m || c2 < 0 || c2 >= k) continue;
        pairs.emplace_back(index(r, c), index(r2, c2));
        pairs.emplace_back(index(r2, c2), index(r, c));
      }
    }
    std::sort(pairs.begin(), pairs.end());
    return pairs;
  };

  std::vector<IndexPair> identity;
  for (Eigen::Index i = 0; i < m * k; ++i) identity.emplace_back(i, i);
  s.bases.push_back(std::move(identity));
  s.bases.push_back(offset_basis(1, 0));  // vertical
  s.bases.push_back(offset_basis(0, 1));  // horizontal
  if (level == NeighborLevel::N8 || level == NeighborLevel::N12) {
    s.bases.push_back(offset_basis(-1, 1));  // NE / SW
    s.bases.push_back(offset_basis(1, 1));   // SE / NW
  }
  if (level == NeighborLevel::N12) {
    s.bases.push_back(offset_basis(2, 0));
    s.bases.push_back(offset_basis(0, 2));
  }
  return s;
}

Matrix precision_matrix(const GmrfStructure& structure,
                        const Eigen::Ref<const Vector>& theta) {
  if (theta.size() != static_cast<Eigen::Index>(structure.parameter_count()))
    fail(ErrorKind::ShapeMismatch, "parameter vector length differs from basis count");
  const Eigen::Index n = structure.dim();
  Matrix p = Matrix::Zero(n, n);
  for (std::size_t j = 0; j < structure.bases.size(); ++j) {
    const double t = theta[static_cast<Eigen::Index>(j)];
    for (const auto& [a, b] : structure.bases[j]) p(a, b) += t;
  }
  return p;
}

SpdMatrix precision_assemble(const GmrfStructure& structure,
                             const Eigen::Ref<const Vector>& theta) {
  return SpdMatrix::certified(precision_matrix(structure, theta));
}

}  // namespace nestcov
