#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "nestcov/model.hpp"

namespace nestcov {

/// gamma * sample_cov + (1 - gamma) * target_scale * I.
struct ShrinkageResult {
  SpdMatrix estimate;
  double gamma = 0.0;
  double target_scale = 0.0;
};

struct CvScore {
  double kappa = 1.0;
  double mean_loglik = 0.0;
};

struct CondRegResult {
  SpdMatrix estimate;
  double kappa = 1.0;
  double tau = 0.0;
  std::vector<CvScore> cv_scores;
};

struct ClippedSpectrum {
  double tau = 0.0;
  Vector eigenvalues;
};

/// Ledoit-Wolf shrinkage toward mu * I with mu = Tr(S)/n. Requires N >= 2.
ShrinkageResult ledoit_wolf(const SampleSet& sample);

/// Restricted Gaussian MLE over spectra with condition number <= kappa:
/// eigenvalues are clipped to [tau, kappa tau] with tau maximizing
/// sum_i -log m_i - l_i / m_i (golden-section search).
ClippedSpectrum cond_reg_solve(const Vector& sample_eigs, double kappa);

/// Applies cond_reg_solve to the spectrum of the sample covariance.
SpdMatrix cond_reg_estimate(const SampleSet& sample, double kappa);

/// K-fold cross-validated choice of kappa. Columns are shuffled with
/// `shuffle_seed` and split into K contiguous folds; the kappa with the
/// largest mean held-out log-likelihood wins (ties go to the smaller kappa)
/// and is refitted on the full sample.
CondRegResult cond_reg_cv(const SampleSet& sample, const std::vector<double>& kappa_grid,
                          int folds = 5, std::uint64_t shuffle_seed = 0);

/// Log-spaced default grid from 1 to 1e4.
std::vector<double> default_kappa_grid();

}  // namespace nestcov
