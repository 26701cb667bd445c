#pragma once

// Scoring and diagnostics: impulse-response norm and correlation, local
// persistency of excitation, empirical Lipschitz profiles and the directional
// consistency gap.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "minlip/signals.hpp"

namespace minlip {

double system_l2_norm(const FirSystem& h);

struct CorrelationResult {
  double corr = 0.0;
  int shift = 0;  // h is compared against h0 delayed by `shift` taps
};

/// Normalized inner product of zero-padded tap vectors, maximized in absolute
/// value over shifts in [-max_shift, max_shift]. Ties go to the smaller |shift|,
/// then to the negative shift. Throws on a zero-norm system.
CorrelationResult system_correlation(const FirSystem& h0, const FirSystem& h, int max_shift = 1);

struct PeReport {
  double epsilon = 0.0;
  std::size_t order = 0;
  bool satisfied = false;
  std::vector<std::size_t> witness_failures;
  // d-th largest singular value of each row's neighbour-difference matrix,
  // zero when the row has fewer than d neighbours.
  std::vector<double> min_singular_values;
};

/// Every row needs d linearly independent differences to rows within epsilon
/// (2-norm). Independence means sigma_d > rank_tol * sigma_1.
PeReport local_pe_check(const RegressorDataset& ds, double epsilon, double rank_tol = 1e-8);

struct LipschitzProfile {
  double L0 = 0.0;
  std::pair<std::size_t, std::size_t> argmax_pair{0, 0};
  // (|z - z'|, (y - y') / (L0 (z - z'))) against the first index of argmax_pair.
  std::vector<std::pair<double, double>> g_samples;
};

/// L0 is the largest slope between two samples with distinct z (zero when no
/// slope is positive). Throws when fewer than two distinct z values exist.
LipschitzProfile empirical_lipschitz(std::span<const double> z, std::span<const double> y);

/// Signed inner product of two unit vectors. Throws when either norm differs
/// from one by more than 1e-8.
double consistency_gap(const Eigen::VectorXd& est_direction, const Eigen::VectorXd& a0);

}  // namespace minlip
