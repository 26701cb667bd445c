#pragma once

// MINLIP identification of monotone Wiener systems: ordering constraints on
// output-sorted data, the minimum-norm quadratic program over the FIR taps,
// its noise-tolerant variant, and the Lipschitz interpolant of the static
// nonlinearity.

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "minlip/qp.hpp"
#include "minlip/signals.hpp"

namespace minlip {

enum class ConstraintProvenance { consecutive, tie_bridge };

/// One ordering constraint y_(upper) - y_(lower) <= a'(u_(upper) - u_(lower))
/// between sorted positions with y_(upper) > y_(lower).
struct ConstraintRow {
  std::size_t lower = 0;
  std::size_t upper = 0;
  ConstraintProvenance provenance = ConstraintProvenance::consecutive;

  friend bool operator==(const ConstraintRow&, const ConstraintRow&) = default;
};

struct ConstraintSystem {
  std::vector<ConstraintRow> rows;

  std::size_t size() const noexcept { return rows.size(); }
};

/// Sorted neighbours (i, i+1). Requires all outputs distinct.
ConstraintSystem build_consecutive_constraints(const SortedDataset& sd);

/// Every member of each tie group is paired with every member of the next
/// strictly higher group. Reduces to the consecutive system when all outputs
/// are distinct; throws when every output is equal.
ConstraintSystem build_tie_constraints(const SortedDataset& sd);

/// The (n-1) x n first-difference matrix with rows (..., -1, 1, ...).
Eigen::MatrixXd difference_matrix(std::size_t n);

/// min 1/2 a'a  s.t.  -(u_(j) - u_(i))'a <= -(y_(j) - y_(i)).
QpProblem minlip_qp(const SortedDataset& sd, const ConstraintSystem& cs);

/// Variables (a, e+, e-); objective 1/2 a'a + gamma/2 * sum(e+ + e-). The
/// residual e = e+ - e- is indexed by original dataset row.
QpProblem minlip_noisy_qp(const SortedDataset& sd, const ConstraintSystem& cs, double gamma);

struct SolverReport {
  QpStatus status = QpStatus::max_iterations;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double complementarity = 0.0;
  std::size_t constraint_count = 0;
};

struct InterpolationSample {
  double x = 0.0;
  double y = 0.0;
};

struct WienerEstimate {
  Eigen::VectorXd a;          // raw QP solution a_T
  double lipschitz_L = 0.0;   // ||a_T||_2
  Eigen::VectorXd direction;  // a_T / L, zero when L == 0
  // Samples of the reconstructed nonlinearity on the normalized abscissa
  // direction'u (+ e/L for the noisy variant); both coordinates non-decreasing.
  std::vector<InterpolationSample> f_hat;
  std::optional<Eigen::VectorXd> residuals_e;
  std::optional<double> gamma;
  SolverReport solver;
};

/// Hard-constraint MINLIP. Throws InfeasibleError when no tap vector
/// satisfies the ordering constraints.
WienerEstimate minlip_identify(const RegressorDataset& ds, const QpSettings& settings = {});

/// Noise-tolerant MINLIP with absolute-loss residuals; always feasible.
WienerEstimate minlip_identify_noisy(const RegressorDataset& ds, double gamma, const QpSettings& settings = {});

/// Piecewise-linear interpolation through f_hat, clamped outside its range.
double reconstruct_f(const WienerEstimate& est, double query);

}  // namespace minlip
