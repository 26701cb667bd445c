#include "minlip/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "minlip/error.hpp"

namespace minlip {

double system_l2_norm(const FirSystem& h) { return h.taps().norm(); }

CorrelationResult system_correlation(const FirSystem& h0, const FirSystem& h, int max_shift) {
  if (max_shift < 0) throw Error("system_correlation: max_shift must be nonnegative");
  const double n0 = h0.taps().norm(), n1 = h.taps().norm();
  if (!(n0 > 0.0) || !(n1 > 0.0)) throw Error("system_correlation: zero-norm system");
  const auto& a = h0.taps();
  const auto& b = h.taps();

  auto at_shift = [&](int s) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const Eigen::Index j = i + s;
      if (j >= 0 && j < b.size()) acc += a[i] * b[j];
    }
    return std::clamp(acc / (n0 * n1), -1.0, 1.0);
  };

  CorrelationResult best{at_shift(0), 0};
  for (int k = 1; k <= max_shift; ++k)
    for (int s : {-k, k}) {
      const double c = at_shift(s);
      if (std::abs(c) > std::abs(best.corr)) best = {c, s};
    }
  return best;
}

PeReport local_pe_check(const RegressorDataset& ds, double epsilon, double rank_tol) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error("local_pe_check: epsilon must be positive");
  const auto n = static_cast<Eigen::Index>(ds.size());
  const auto d = static_cast<Eigen::Index>(ds.order());
  PeReport rep;
  rep.epsilon = epsilon;
  rep.order = ds.order();
  rep.min_singular_values.assign(ds.size(), 0.0);

  const double eps2 = epsilon * epsilon;
  std::vector<Eigen::Index> nb;
  for (Eigen::Index i = 0; i < n; ++i) {
    nb.clear();
    for (Eigen::Index k = 0; k < n; ++k)
      if (k != i && (ds.rows.row(k) - ds.rows.row(i)).squaredNorm() <= eps2) nb.push_back(k);

    bool ok = false;
    if (static_cast<Eigen::Index>(nb.size()) >= d && d > 0) {
      Eigen::MatrixXd diff(static_cast<Eigen::Index>(nb.size()), d);
      for (std::size_t r = 0; r < nb.size(); ++r)
        diff.row(static_cast<Eigen::Index>(r)) = ds.rows.row(nb[r]) - ds.rows.row(i);
      const Eigen::VectorXd sv = Eigen::BDCSVD<Eigen::MatrixXd>(diff).singularValues();
      const double sd = sv[d - 1];
      rep.min_singular_values[static_cast<std::size_t>(i)] = sd;
      ok = sd > rank_tol * sv[0];
    }
    if (!ok) rep.witness_failures.push_back(static_cast<std::size_t>(i));
  }
  rep.satisfied = rep.witness_failures.empty();
  return rep;
}

LipschitzProfile empirical_lipschitz(std::span<const double> z, std::span<const double> y) {
  if (z.size() != y.size()) throw Error(fmt::format("empirical_lipschitz: {} abscissae but {} ordinates", z.size(), y.size()));
  for (std::size_t i = 0; i < z.size(); ++i)
    if (!std::isfinite(z[i]) || !std::isfinite(y[i])) throw Error("empirical_lipschitz: non-finite sample");

  std::vector<std::size_t> order(z.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });

  // The steepest chord joins two adjacent distinct-z levels: the highest y of
  // the upper level against the lowest y of the lower one.
  struct Level {
    double z;
    std::size_t lo, hi;  // indices of min and max y
  };
  std::vector<Level> levels;
  for (std::size_t k : order) {
    if (levels.empty() || z[k] != levels.back().z) {
      levels.push_back({z[k], k, k});
    } else {
      auto& lv = levels.back();
      if (y[k] < y[lv.lo]) lv.lo = k;
      if (y[k] > y[lv.hi]) lv.hi = k;
    }
  }
  if (levels.size() < 2) throw Error("empirical_lipschitz: all z values are equal");

  LipschitzProfile prof;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l + 1 < levels.size(); ++l) {
    const auto& a = levels[l];
    const auto& b = levels[l + 1];
    const double slope = (y[b.hi] - y[a.lo]) / (b.z - a.z);
    if (slope > best) {
      best = slope;
      prof.argmax_pair = {a.lo, b.hi};
    }
  }
  prof.L0 = std::max(best, 0.0);
  if (prof.L0 > 0.0) {
    const std::size_t ref = prof.argmax_pair.first;
    for (std::size_t k = 0; k < z.size(); ++k) {
      const double dz = z[k] - z[ref];
      if (dz == 0.0) continue;
      prof.g_samples.emplace_back(std::abs(dz), (y[k] - y[ref]) / (prof.L0 * dz));
    }
  }
  return prof;
}

double consistency_gap(const Eigen::VectorXd& est_direction, const Eigen::VectorXd& a0) {
  if (est_direction.size() != a0.size()) throw Error("consistency_gap: dimension mismatch");
  if (std::abs(est_direction.norm() - 1.0) > 1e-8 || std::abs(a0.norm() - 1.0) > 1e-8)
    throw Error("consistency_gap: both vectors must have unit 2-norm");
  return est_direction.dot(a0);
}

}  // namespace minlip
