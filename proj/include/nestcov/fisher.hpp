#pragma once

#include <string>
#include <vector>

#include "nestcov/model.hpp"

namespace nestcov {

/// Per-observation Fisher information with parameter labels.
struct FisherInfo {
  Matrix matrix;
  std::vector<std::string> labels;
};

/// Asymptotic covariance G (G^T J G)^-1 G^T of a sub-model estimate,
/// expressed in the ambient coordinates.
struct ProjectedCov {
  Matrix matrix;
  Eigen::Index rank = 0;
};

struct PsdOrder {
  double min_eigenvalue = 0.0;
  bool ordered = false;
};

/// diag(1 / (2 d_i^2)).
FisherInfo fisher_diag(const DiagonalCovariance& d);

/// Information of (c, alpha). Uses the model's c1 as c; c2 must be zero.
FisherInfo fisher_decay2(const DecayModel& model);

/// Information of (c1, c2, alpha).
FisherInfo fisher_decay3(const DecayModel& model);

/// (1/2) Tr(P^-1 B_j P^-1 B_l).
FisherInfo fisher_gmrf(const Vector& theta, const GmrfStructure& structure);

/// d(d_i)/d(param_j): n x 2 for the two-parameter family, n x 3 otherwise.
Matrix decay_jacobian(const DecayModel& model);

/// Throws SingularInformation when G^T J G cannot be inverted.
ProjectedCov projected_cov(const FisherInfo& ambient, const Matrix& jacobian);

/// Limit second moment of sqrt(N) (d_hat - d) for the three-parameter fit.
/// Equals projected_cov with the model Jacobian when c2 != 0. At c2 = 0 that
/// Jacobian loses rank and the fit sits on the boundary of its image, so the
/// result is (Q_plane + Q_cone) / 2 with Q_cone spanned by G2 and d o h^2.
ProjectedCov decay3_asymptotic_cov(const DecayModel& model);

/// (1/N) Tr Q.
double asymptotic_mse(const ProjectedCov& q, Eigen::Index N);

/// Smallest eigenvalue of big - small; ordered when it is >= -1e-8.
PsdOrder psd_order_check(const ProjectedCov& small, const ProjectedCov& big);

/// Projected covariances of the diagonal, three- and two-parameter decay
/// models at a common two-parameter truth (c2 = 0 embedding).
struct NestedDecayCovariances {
  ProjectedCov diag;
  ProjectedCov decay3;
  ProjectedCov decay2;
};

NestedDecayCovariances nested_decay_covariances(const DecaySpectrum& spectrum, double c,
                                                double alpha);

}  // namespace nestcov
