#include "minlip/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "minlip/error.hpp"
#include "minlip/random.hpp"

namespace minlip {

std::string_view to_string(BaselineMethod method) noexcept {
  switch (method) {
    case BaselineMethod::ls_xy: return "ls_xy";
    case BaselineMethod::ls_xz: return "ls_xz";
    case BaselineMethod::bai2006: return "bai2006";
  }
  return "unknown";
}

namespace {

BaselineEstimate least_squares(const Eigen::MatrixXd& U, const Eigen::VectorXd& y, BaselineMethod method) {
  if (U.rows() == 0 || U.cols() == 0) throw Error("least squares: empty regressor matrix");
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(U);
  BaselineEstimate est;
  est.method = method;
  est.a = cod.solve(y);
  est.diagnostics.rank = cod.rank();
  est.diagnostics.rank_deficient = cod.rank() < U.cols();
  return est;
}

struct SignCost {
  Eigen::MatrixXd du;  // consecutive sorted differences
  Eigen::VectorXd s;   // sign of the output increments
  double beta;

  double value(const Eigen::VectorXd& a) const {
    return (s - (beta * (du * a)).array().tanh().matrix()).squaredNorm();
  }
  Eigen::VectorXd gradient(const Eigen::VectorXd& a) const {
    const Eigen::ArrayXd t = (beta * (du * a)).array().tanh();
    const Eigen::VectorXd w = ((s.array() - t) * (1.0 - t.square())).matrix();
    return -2.0 * beta * (du.transpose() * w);
  }
};

struct Descent {
  Eigen::VectorXd a;
  double cost = 0.0;
  double initial_gradient_norm = 0.0;
  int iterations = 0;
};

Descent descend(const SignCost& f, Eigen::VectorXd a, const Bai2006Settings& st) {
  Descent out;
  double cost = f.value(a);
  out.initial_gradient_norm = f.gradient(a).norm();
  double step = 1.0;
  int it = 0;
  for (; it < st.max_iterations; ++it) {
    Eigen::VectorXd g = f.gradient(a);
    g -= a.dot(g) * a;  // tangent to the sphere
    const double gn2 = g.squaredNorm();
    if (std::sqrt(gn2) < st.gradient_tol) break;
    step = std::min(2.0 * step, 1e6);
    bool moved = false;
    for (int k = 0; k < 60; ++k, step *= 0.5) {
      Eigen::VectorXd trial = a - step * g;
      const double tn = trial.norm();
      if (!(tn > 0.0)) continue;
      trial /= tn;
      const double c = f.value(trial);
      if (c <= cost - 1e-4 * step * gn2) {
        a = std::move(trial);
        cost = c;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  out.a = std::move(a);
  out.cost = cost;
  out.iterations = it;
  return out;
}

}  // namespace

BaselineEstimate ls_fir(const RegressorDataset& ds) {
  return least_squares(ds.rows, ds.outputs, BaselineMethod::ls_xy);
}

BaselineEstimate ls_oracle(const TimeSeries& u, const TimeSeries& z, std::size_t d, std::size_t burn_in) {
  if (d == 0 || d > u.size()) throw Error("ls_oracle: order d exceeds the data length");
  const RegressorDataset ds = build_regressors(u, z, d, burn_in);
  return least_squares(ds.rows, ds.outputs, BaselineMethod::ls_xz);
}

BaselineEstimate bai2006(const RegressorDataset& ds, const Bai2006Settings& st) {
  if (!(st.beta > 0.0)) throw Error("bai2006: beta must be positive");
  if (st.starts < 1) throw Error("bai2006: at least one start is required");
  if (ds.size() < 2) throw Error("bai2006: at least two samples are required");

  const SortedDataset sd = sort_by_output(ds);
  const auto n = static_cast<Eigen::Index>(sd.size());
  const auto d = static_cast<Eigen::Index>(ds.order());
  SignCost f{Eigen::MatrixXd(n - 1, d), Eigen::VectorXd(n - 1), st.beta};
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const auto lo = static_cast<std::size_t>(i);
    f.du.row(i) = sd.row(lo + 1) - sd.row(lo);
    const double dy = sd.output(lo + 1) - sd.output(lo);
    f.s[i] = dy > 0.0 ? 1.0 : 0.0;
  }

  BaselineEstimate best;
  best.method = BaselineMethod::bai2006;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int k = 0; k < st.starts; ++k) {
    std::mt19937_64 rng(derive_seed(st.seed, {static_cast<std::uint64_t>(k)}));
    std::normal_distribution<double> normal;
    Eigen::VectorXd a0(d);
    do {
      for (Eigen::Index j = 0; j < d; ++j) a0[j] = normal(rng);
    } while (!(a0.norm() > 0.0));
    a0.normalize();

    Descent r = descend(f, std::move(a0), st);
    if (r.cost < best_cost) {
      best_cost = r.cost;
      best.a = std::move(r.a);
      auto& dg = best.diagnostics;
      dg.iterations = r.iterations;
      dg.final_cost = r.cost;
      dg.initial_gradient_norm = r.initial_gradient_norm;
      dg.flat_objective = r.initial_gradient_norm < 1e-6;
      dg.best_start = k;
    }
  }
  return best;
}

BaselineEstimate bai2006(const RegressorDataset& ds, double beta, int starts, std::uint64_t seed) {
  Bai2006Settings st;
  st.beta = beta;
  st.starts = starts;
  st.seed = seed;
  return bai2006(ds, st);
}

}  // namespace minlip
