#pragma once

// Dense convex quadratic programs
//
//   minimize    1/2 x'Px + q'x
//   subject to  Gx <= h
//
// with P symmetric positive semidefinite. A primal-dual interior point method
// does the bulk of the work; an over-relaxed ADMM with residual-balancing
// penalty updates takes over when it stalls and detects infeasibility. Both
// finish with active-set polishing, and `optimal` always comes with a KKT
// certificate re-checked against the absolute tolerances.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

namespace minlip {

struct QpProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;

  Eigen::Index num_variables() const noexcept { return q.size(); }
  Eigen::Index num_constraints() const noexcept { return h.size(); }

  /// Throws minlip::Error on inconsistent dimensions, non-finite data or an
  /// asymmetric P (relative asymmetry above 1e-12).
  void validate() const;
  double objective(const Eigen::VectorXd& x) const;
};

enum class QpStatus { optimal, infeasible, max_iterations };

/// interior_point falls back to ADMM when it stalls. Either method reports
/// infeasibility only with a Farkas certificate.
enum class QpMethod { interior_point, admm };

std::string_view to_string(QpStatus status) noexcept;

struct QpSettings {
  double feas_tol = 1e-8;
  double opt_tol = 1e-8;
  int max_iterations = 50'000;
  std::optional<Eigen::VectorXd> warm_start;
  QpMethod method = QpMethod::interior_point;

  // ADMM internals.
  double rho = 0.1;
  double sigma = 1e-6;
  double relaxation = 1.6;
  int check_interval = 25;
  double infeasibility_tol = 1e-6;
  double polish_regularization = 1e-10;
};

struct KktResiduals {
  double primal = 0.0;           // max_i max(0, (Gx - h)_i)
  double dual = 0.0;             // ||Px + q + G'lambda||_inf
  double complementarity = 0.0;  // max_i |lambda_i (Gx - h)_i|
};

/// Residuals of a primal/dual pair; negative multipliers count against
/// stationarity as if clipped to zero.
KktResiduals kkt_residuals(const QpProblem& p, const Eigen::VectorXd& x, const Eigen::VectorXd& lambda);

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;  // inequality multipliers, lambda >= 0
  QpStatus status = QpStatus::max_iterations;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double complementarity = 0.0;
  double objective = 0.0;
  bool polished = false;
  /// For status == infeasible: a nonnegative y with G'y ~ 0 and h'y < 0.
  Eigen::VectorXd infeasibility_certificate;
};

QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings = {});

/// Plain-text dump, one block per matrix: a header line `<name> <rows> <cols>`
/// followed by the rows, space separated, full precision.
void write_qp_dump(std::ostream& out, const QpProblem& problem);
QpProblem read_qp_dump(std::istream& in);

}  // namespace minlip
