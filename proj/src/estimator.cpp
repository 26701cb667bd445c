#include "minlip/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "minlip/error.hpp"

namespace minlip {

namespace {

SolverReport report_of(const QpSolution& sol, std::size_t constraint_count) {
  return {sol.status,          sol.iterations,  sol.primal_residual,
          sol.dual_residual,   sol.complementarity, constraint_count};
}

// Samples in output order, ties by abscissa. An abscissa is pushed right when
// the stored slope would exceed L (only ever by about the solver residual).
std::vector<InterpolationSample> build_interpolant(const SortedDataset& sd, const Eigen::VectorXd& abscissa,
                                                   double L) {
  std::vector<InterpolationSample> out;
  out.reserve(sd.size());
  for (const auto& g : sd.tie_groups) {
    const auto first = out.size();
    for (std::size_t pos = g.begin; pos < g.end; ++pos)
      out.push_back({abscissa[static_cast<Eigen::Index>(sd.perm[pos])], sd.output(pos)});
    std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end(),
              [](const auto& a, const auto& b) { return a.x < b.x; });
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < out.size(); ++k) {
    const double prev = out[k - 1].x;
    const double dy = out[k].y - out[k - 1].y;
    auto too_steep = [&](double x) {
      const double dx = x - prev;
      if (dx < 0.0) return true;
      if (dy == 0.0) return false;
      return L > 0.0 && (dx == 0.0 || dy / dx > L);
    };
    double x = out[k].x;
    if (too_steep(x)) {
      x = L > 0.0 ? prev + dy / L : prev;
      while (too_steep(x)) x = std::nextafter(x, inf);
    }
    out[k].x = x;
  }
  return out;
}

void fill_direction(WienerEstimate& est) {
  est.lipschitz_L = est.a.norm();
  est.direction = est.lipschitz_L > 0.0 ? Eigen::VectorXd(est.a / est.lipschitz_L)
                                        : Eigen::VectorXd(Eigen::VectorXd::Zero(est.a.size()));
}

}  // namespace

ConstraintSystem build_consecutive_constraints(const SortedDataset& sd) {
  for (const auto& g : sd.tie_groups)
    if (g.size() > 1) throw Error("tied outputs present; use build_tie_constraints");
  ConstraintSystem cs;
  for (std::size_t i = 0; i + 1 < sd.size(); ++i) cs.rows.push_back({i, i + 1, ConstraintProvenance::consecutive});
  return cs;
}

ConstraintSystem build_tie_constraints(const SortedDataset& sd) {
  if (sd.tie_groups.size() <= 1) throw Error("output carries no ordering information");
  ConstraintSystem cs;
  for (std::size_t g = 0; g + 1 < sd.tie_groups.size(); ++g) {
    const auto& lo = sd.tie_groups[g];
    const auto& hi = sd.tie_groups[g + 1];
    const auto tag = lo.size() == 1 && hi.size() == 1 ? ConstraintProvenance::consecutive
                                                      : ConstraintProvenance::tie_bridge;
    for (std::size_t i = lo.begin; i < lo.end; ++i)
      for (std::size_t j = hi.begin; j < hi.end; ++j) cs.rows.push_back({i, j, tag});
  }
  return cs;
}

Eigen::MatrixXd difference_matrix(std::size_t n) {
  if (n == 0) return Eigen::MatrixXd(0, 0);
  const auto rows = static_cast<Eigen::Index>(n - 1);
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < rows; ++i) {
    delta(i, i) = -1.0;
    delta(i, i + 1) = 1.0;
  }
  return delta;
}

QpProblem minlip_qp(const SortedDataset& sd, const ConstraintSystem& cs) {
  const auto d = static_cast<Eigen::Index>(sd.base.order());
  const auto m = static_cast<Eigen::Index>(cs.size());
  QpProblem p;
  p.P = Eigen::MatrixXd::Identity(d, d);
  p.q = Eigen::VectorXd::Zero(d);
  p.G.resize(m, d);
  p.h.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto& row = cs.rows[static_cast<std::size_t>(r)];
    p.G.row(r) = sd.row(row.lower) - sd.row(row.upper);
    p.h[r] = sd.output(row.lower) - sd.output(row.upper);
  }
  return p;
}

QpProblem minlip_noisy_qp(const SortedDataset& sd, const ConstraintSystem& cs, double gamma) {
  if (!(gamma > 0.0)) throw Error("gamma must be positive");
  const auto d = static_cast<Eigen::Index>(sd.base.order());
  const auto n = static_cast<Eigen::Index>(sd.size());
  const auto m = static_cast<Eigen::Index>(cs.size());
  const Eigen::Index nv = d + 2 * n;
  const Eigen::Index ep = d, em = d + n;  // offsets of e+ and e-

  QpProblem p;
  p.P = Eigen::MatrixXd::Zero(nv, nv);
  p.P.topLeftCorner(d, d).setIdentity();
  p.q = Eigen::VectorXd::Zero(nv);
  p.q.tail(2 * n).setConstant(0.5 * gamma);
  p.G = Eigen::MatrixXd::Zero(m + 2 * n, nv);
  p.h = Eigen::VectorXd::Zero(m + 2 * n);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto& row = cs.rows[static_cast<std::size_t>(r)];
    const auto lo = static_cast<Eigen::Index>(sd.perm[row.lower]);
    const auto hi = static_cast<Eigen::Index>(sd.perm[row.upper]);
    p.G.row(r).head(d) = sd.row(row.lower) - sd.row(row.upper);
    p.G(r, ep + hi) -= 1.0;
    p.G(r, em + hi) += 1.0;
    p.G(r, ep + lo) += 1.0;
    p.G(r, em + lo) -= 1.0;
    p.h[r] = sd.output(row.lower) - sd.output(row.upper);
  }
  for (Eigen::Index k = 0; k < 2 * n; ++k) p.G(m + k, d + k) = -1.0;
  return p;
}

WienerEstimate minlip_identify(const RegressorDataset& ds, const QpSettings& settings) {
  const SortedDataset sd = sort_by_output(ds);
  const ConstraintSystem cs = build_tie_constraints(sd);
  const QpSolution sol = solve_qp(minlip_qp(sd, cs), settings);
  if (sol.status == QpStatus::infeasible)
    throw InfeasibleError(
        "MINLIP ordering constraints are infeasible (no tap vector reproduces the output ordering); "
        "use the noisy variant with a finite gamma");

  WienerEstimate est;
  est.a = sol.x;
  fill_direction(est);
  const Eigen::VectorXd abscissa =
      est.lipschitz_L > 0.0 ? Eigen::VectorXd(sd.base.rows * est.direction) : Eigen::VectorXd(sd.base.rows * est.a);
  est.f_hat = build_interpolant(sd, abscissa, est.lipschitz_L);
  est.solver = report_of(sol, cs.size());
  return est;
}

WienerEstimate minlip_identify_noisy(const RegressorDataset& ds, double gamma, const QpSettings& settings) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error("gamma must be a positive finite number");
  const SortedDataset sd = sort_by_output(ds);
  const ConstraintSystem cs = build_tie_constraints(sd);
  const QpSolution sol = solve_qp(minlip_noisy_qp(sd, cs, gamma), settings);
  if (sol.status == QpStatus::infeasible) throw Error("noisy MINLIP reported infeasible; this indicates a solver fault");

  const auto d = static_cast<Eigen::Index>(ds.order());
  const auto n = static_cast<Eigen::Index>(ds.size());
  WienerEstimate est;
  est.a = sol.x.head(d);
  est.residuals_e = Eigen::VectorXd(sol.x.segment(d, n) - sol.x.segment(d + n, n));
  est.gamma = gamma;
  fill_direction(est);
  Eigen::VectorXd abscissa = ds.rows * est.a + *est.residuals_e;
  if (est.lipschitz_L > 0.0) abscissa /= est.lipschitz_L;
  est.f_hat = build_interpolant(sd, abscissa, est.lipschitz_L);
  est.solver = report_of(sol, cs.size());
  return est;
}

double reconstruct_f(const WienerEstimate& est, double query) {
  const auto& s = est.f_hat;
  if (s.empty()) throw Error("reconstruct_f: estimate has no interpolation samples");
  if (query <= s.front().x) return s.front().y;
  if (query >= s.back().x) return s.back().y;
  const auto hi = static_cast<std::size_t>(
      std::upper_bound(s.begin(), s.end(), query, [](double v, const auto& p) { return v < p.x; }) - s.begin());
  const auto& a = s[hi - 1];
  const auto& b = s[hi];
  if (b.x == a.x) return b.y;
  return a.y + (query - a.x) / (b.x - a.x) * (b.y - a.y);
}

}  // namespace minlip
