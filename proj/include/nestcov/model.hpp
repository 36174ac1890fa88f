#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nestcov/error.hpp"

namespace nestcov {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// n x N block of zero-mean observations, one observation per column.
class SampleSet {
 public:
  explicit SampleSet(Matrix data, std::optional<std::uint64_t> seed = {});

  const Matrix& data() const noexcept { return data_; }
  Eigen::Index dim() const noexcept { return data_.rows(); }
  Eigen::Index size() const noexcept { return data_.cols(); }
  std::optional<std::uint64_t> seed() const noexcept { return seed_; }

  /// Sample made of the listed columns, in the listed order.
  SampleSet select(const std::vector<Eigen::Index>& columns) const;

 private:
  Matrix data_;
  std::optional<std::uint64_t> seed_;
};

/// Dense symmetric matrix, optionally carrying a Cholesky factor that
/// certifies positive definiteness.
class SpdMatrix {
 public:
  /// Factorizes `values`; throws NotPositiveDefinite when that fails.
  static SpdMatrix certified(Matrix values);
  /// Checks symmetry only.
  static SpdMatrix uncertified(Matrix values);

  const Matrix& values() const noexcept { return values_; }
  Eigen::Index size() const noexcept { return values_.rows(); }
  bool has_certificate() const noexcept { return factor_.has_value(); }
  /// Lower-triangular L with L * L^T == values(). Throws if uncertified.
  const Matrix& factor() const;
  double log_det() const;

 private:
  SpdMatrix(Matrix values, std::optional<Matrix> factor)
      : values_(std::move(values)), factor_(std::move(factor)) {}

  Matrix values_;
  std::optional<Matrix> factor_;
};

/// Covariance diag(d_1, ..., d_n) together with precisions tau_i = 1 / d_i.
class DiagonalCovariance {
 public:
  explicit DiagonalCovariance(Vector d);

  const Vector& d() const noexcept { return d_; }
  const Vector& tau() const noexcept { return tau_; }
  Eigen::Index size() const noexcept { return d_.size(); }
  Matrix dense() const { return d_.asDiagonal(); }

 private:
  Vector d_;
  Vector tau_;
};

/// Negative Laplace eigenvalues lambda_i and weights h_i = -lambda_i shared by
/// the decay models.
class DecaySpectrum {
 public:
  explicit DecaySpectrum(Vector lambda);

  const Vector& lambda() const noexcept { return lambda_; }
  const Vector& h() const noexcept { return h_; }
  Eigen::Index size() const noexcept { return lambda_.size(); }

 private:
  Vector lambda_;
  Vector h_;
};

enum class DecayFamily { TwoParam, ThreeParam };

/// Variances d_i = ((c1 + c2 h_i) exp(alpha h_i))^-1. The two-parameter
/// family is stored with c2 = 0 and exposes (c, alpha).
class DecayModel {
 public:
  static DecayModel two_param(DecaySpectrum spectrum, double c, double alpha);
  static DecayModel three_param(DecaySpectrum spectrum, double c1, double c2,
                                double alpha);

  const DecaySpectrum& spectrum() const noexcept { return spectrum_; }
  DecayFamily family() const noexcept { return family_; }
  /// (c, alpha) or (c1, c2, alpha).
  Vector params() const;
  double c1() const noexcept { return c1_; }
  double c2() const noexcept { return c2_; }
  double alpha() const noexcept { return alpha_; }

  /// tau_i = (c1 + c2 h_i) f_i(alpha) with f_i(alpha) = exp(-alpha lambda_i).
  Vector precisions() const;

 private:
  DecayModel(DecaySpectrum spectrum, DecayFamily family, double c1, double c2,
             double alpha);

  DecaySpectrum spectrum_;
  DecayFamily family_;
  double c1_;
  double c2_;
  double alpha_;
};

enum class NeighborLevel { N4, N8, N12 };

std::string_view to_string(NeighborLevel level) noexcept;
int basis_count(NeighborLevel level) noexcept;

/// Directed index pair (a, b) of a symmetric 0/1 basis matrix.
using IndexPair = std::pair<Eigen::Index, Eigen::Index>;

/// Neighbor-class bases B_j of a linearly parameterized precision matrix
/// over an m x k grid stacked column by column (index = col * m + row).
struct GmrfStructure {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  NeighborLevel level = NeighborLevel::N4;
  std::vector<std::vector<IndexPair>> bases;

  Eigen::Index dim() const noexcept { return rows * cols; }
  std::size_t parameter_count() const noexcept { return bases.size(); }
};

/// Dirichlet 5-point Laplacian eigenvalues on the unit square with m x k
/// interior nodes, sorted descending (closest to zero first).
Vector laplace_eigenvalues(Eigen::Index m, Eigen::Index k);

DiagonalCovariance decay_diagonal(const DecayModel& model);

GmrfStructure gmrf_structure(Eigen::Index m, Eigen::Index k,
                             NeighborLevel level);

/// Dense P = sum_j theta_j B_j without a definiteness check.
Matrix precision_matrix(const GmrfStructure& structure,
                        const Eigen::Ref<const Vector>& theta);

/// P(theta) with a positive-definiteness certificate.
SpdMatrix precision_assemble(const GmrfStructure& structure,
                             const Eigen::Ref<const Vector>& theta);

}  // namespace nestcov
