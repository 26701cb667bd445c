#pragma once

// Reference FIR estimators: least squares on (u, y), least squares on the
// latent (u, z), and the smooth-sign ranking estimator of Bai (2006).

#include <cstddef>
#include <cstdint>
#include <string_view>

#include <Eigen/Dense>

#include "minlip/signals.hpp"

namespace minlip {

enum class BaselineMethod { ls_xy, ls_xz, bai2006 };

std::string_view to_string(BaselineMethod method) noexcept;

struct BaselineDiagnostics {
  // least squares
  Eigen::Index rank = 0;
  bool rank_deficient = false;
  // bai2006
  int iterations = 0;
  double final_cost = 0.0;
  double initial_gradient_norm = 0.0;
  bool flat_objective = false;  // gradient norm below 1e-6 at the start
  int best_start = 0;
};

struct BaselineEstimate {
  Eigen::VectorXd a;
  BaselineMethod method = BaselineMethod::ls_xy;
  BaselineDiagnostics diagnostics;
};

/// argmin_a sum (a'u_t - y_t)^2; the minimum-norm solution when U is rank deficient.
BaselineEstimate ls_fir(const RegressorDataset& ds);

/// Least squares of z on lagged u. Throws when d exceeds the data length.
BaselineEstimate ls_oracle(const TimeSeries& u, const TimeSeries& z, std::size_t d, std::size_t burn_in = 0);

struct Bai2006Settings {
  double beta = 10.0;
  int starts = 5;
  std::uint64_t seed = 0;
  int max_iterations = 500;
  double gradient_tol = 1e-8;
};

/// Minimizes sum_i (sign(dy_i) - tanh(beta a'du_i))^2 over consecutive sorted
/// pairs on the unit sphere by gradient descent with backtracking. The best of
/// `starts` random unit initializations is returned, ties going to the lower
/// start index.
BaselineEstimate bai2006(const RegressorDataset& ds, const Bai2006Settings& settings = {});
BaselineEstimate bai2006(const RegressorDataset& ds, double beta, int starts, std::uint64_t seed);

}  // namespace minlip
