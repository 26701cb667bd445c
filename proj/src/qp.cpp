#include "minlip/qp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Sparse>
#include <fmt/format.h>

#include "minlip/error.hpp"

namespace minlip {

namespace {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using SpRowMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

struct Candidate {
  Vec x;
  Vec lambda;
  KktResiduals res;
  double score = std::numeric_limits<double>::infinity();
};

double certificate_score(const KktResiduals& r, const QpSettings& s) {
  return std::max({r.primal / s.feas_tol, r.dual / s.opt_tol, r.complementarity / s.opt_tol});
}

double max_step(const Vec& v, const Vec& dv) {
  double a = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
  return a;
}

// Works on the row-scaled constraints G_ x <= h_; multipliers of the original
// rows are the scaled ones divided by the row norms.
template <class GMat>
class Solver {
  static constexpr bool kDense = std::is_same_v<GMat, Eigen::MatrixXd>;

 public:
  Solver(const QpProblem& prob, GMat g_scaled, Vec h_scaled, Vec row_scale, const QpSettings& s)
      : prob_(prob), s_(s), G_(std::move(g_scaled)), h_(std::move(h_scaled)), scale_(std::move(row_scale)),
        n_(prob.num_variables()), m_(prob.num_constraints()), rho_(s.rho) {
    p_sparse_ = prob_.P.sparseView();
    eye_.resize(n_, n_);
    eye_.setIdentity();
    if constexpr (!kDense) split_columns();
  }

  QpSolution run() {
    if (s_.warm_start) {
      if (s_.warm_start->size() != n_) throw Error("warm start has the wrong dimension");
      const Vec r = G_ * *s_.warm_start - h_;
      std::vector<char> active(static_cast<std::size_t>(m_));
      for (Eigen::Index i = 0; i < m_; ++i) active[static_cast<std::size_t>(i)] = r[i] >= -1e-7;
      if (accept(polish(active, *s_.warm_start, Vec::Zero(m_)))) return finish(QpStatus::optimal);
    }
    if (s_.method == QpMethod::interior_point && m_ > 0) {
      if (run_ipm()) return finish(QpStatus::optimal);
      if (ipm_infeasible_) return finish(QpStatus::infeasible);
    }
    return run_admm();
  }

 private:
  // ---- interior point (Mehrotra predictor-corrector) ----

  bool run_ipm() {
    const int budget = std::min(s_.max_iterations, 200);
    if (budget == 0) return false;
    factor_normal(Vec::Ones(m_));
    Vec x = solve_normal(-prob_.q + G_.transpose() * h_);
    Vec s = (h_ - G_ * x).cwiseMax(1.0);
    Vec lam = Vec::Ones(m_);

    const double hn = 1.0 + inf_norm(h_), qn = 1.0 + inf_norm(prob_.q);
    double last_polish_mu = std::numeric_limits<double>::infinity();
    double best_rel = std::numeric_limits<double>::infinity();
    Vec best_x, best_s, best_lam;
    auto try_polish = [&](const Vec& xp, const Vec& sp, const Vec& lp) {
      std::vector<char> active(static_cast<std::size_t>(m_));
      for (Eigen::Index i = 0; i < m_; ++i) active[static_cast<std::size_t>(i)] = sp[i] < lp[i];
      return accept(polish(active, xp, lp));
    };

    Vec dx, ds, dl;
    for (int k = 1; k <= budget; ++k) {
      const Vec rd = prob_.P * x + prob_.q + G_.transpose() * lam;
      const Vec rp = G_ * x + s - h_;
      const double mu = s.dot(lam) / static_cast<double>(m_);
      if (!std::isfinite(mu) || !x.allFinite()) break;

      const double infeas = std::max(inf_norm(rp) / hn, inf_norm(rd) / qn);
      const double rel = std::max(infeas, mu);
      if (farkas(lam) || (k > 1 && farkas(dl.cwiseMax(0.0)))) {
        ipm_infeasible_ = true;
        return false;
      }
      if (rel < best_rel) {
        best_rel = rel;
        best_x = x;
        best_s = s;
        best_lam = lam;
      } else if (rel > 100.0 * best_rel) {
        break;  // lost accuracy in the normal equations
      }
      if (infeas < 1e-6 && mu < 1e-6 && mu < 0.01 * last_polish_mu) {
        last_polish_mu = mu;
        if (try_polish(x, s, lam)) return true;
      }
      if (mu < 1e-16 * std::max(1.0, std::abs(prob_.objective(x)))) break;
      ++iterations_;

      const Vec w = lam.cwiseQuotient(s);
      if (!factor_normal(w)) break;

      // predictor
      Vec rc = s.cwiseProduct(lam);
      direction(w, s, rd, rp, rc, dx, ds, dl);
      const double a_aff = std::min(max_step(s, ds), max_step(lam, dl));
      const double mu_aff = (s + a_aff * ds).dot(lam + a_aff * dl) / static_cast<double>(m_);
      const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

      // corrector
      rc.array() += ds.cwiseProduct(dl).array() - sigma * mu;
      direction(w, s, rd, rp, rc, dx, ds, dl);
      const double a = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(lam, dl)));
      if (!(a > 1e-12)) break;
      x += a * dx;
      s += a * ds;
      lam += a * dl;
    }
    return best_x.size() && try_polish(best_x, best_s, best_lam);
  }

  // Newton step for the perturbed KKT system; rc is the complementarity
  // residual s.*lam - target.
  void direction(const Vec& w, const Vec& s, const Vec& rd, const Vec& rp, const Vec& rc, Vec& dx, Vec& ds,
                 Vec& dl) {
    const Vec rcs = rc.cwiseQuotient(s);
    const Vec t = w.cwiseProduct(rp) - rcs;
    dx = solve_normal(-rd - G_.transpose() * t);
    const Vec gdx = G_ * dx;
    dl = w.cwiseProduct(gdx + rp) - rcs;
    ds = -rp - gdx;
  }

  // Columns touched by most rows (the MINLIP taps) are kept as a dense block
  // so that G'WG is assembled with dense kernels.
  void split_columns() {
    std::vector<Eigen::Index> nnz(static_cast<std::size_t>(n_), 0);
    for (Eigen::Index r = 0; r < m_; ++r)
      for (typename GMat::InnerIterator it(G_, r); it; ++it) ++nnz[static_cast<std::size_t>(it.col())];
    std::vector<Eigen::Index> sparse_index(static_cast<std::size_t>(n_), -1), dense_index(static_cast<std::size_t>(n_), -1);
    for (Eigen::Index j = 0; j < n_; ++j) {
      if (nnz[static_cast<std::size_t>(j)] > m_ / 10 && nnz[static_cast<std::size_t>(j)] > 64) {
        dense_index[static_cast<std::size_t>(j)] = static_cast<Eigen::Index>(dense_cols_.size());
        dense_cols_.push_back(j);
      } else {
        sparse_index[static_cast<std::size_t>(j)] = static_cast<Eigen::Index>(sparse_cols_.size());
        sparse_cols_.push_back(j);
      }
    }
    const auto nd = static_cast<Eigen::Index>(dense_cols_.size());
    const auto ns = static_cast<Eigen::Index>(sparse_cols_.size());
    gd_ = Eigen::MatrixXd::Zero(m_, nd);
    std::vector<Eigen::Triplet<double>> trip;
    for (Eigen::Index r = 0; r < m_; ++r)
      for (typename GMat::InnerIterator it(G_, r); it; ++it) {
        const auto c = static_cast<std::size_t>(it.col());
        if (dense_index[c] >= 0)
          gd_(r, dense_index[c]) = it.value();
        else
          trip.emplace_back(r, sparse_index[c], it.value());
      }
    gs_.resize(m_, ns);
    gs_.setFromTriplets(trip.begin(), trip.end());
  }

  // M = P + G' diag(w) G, factored densely or sparsely by its fill.
  bool factor_normal(const Vec& w) {
    if constexpr (kDense) {
      const Eigen::MatrixXd gw = w.cwiseSqrt().asDiagonal() * G_;
      Eigen::MatrixXd md = prob_.P;
      md.selfadjointView<Eigen::Lower>().rankUpdate(gw.transpose());
      normal_dense_ = true;
      return factor_dense(md.selfadjointView<Eigen::Lower>());
    } else {
      const auto nd = static_cast<Eigen::Index>(dense_cols_.size());
      const Vec sw = w.cwiseSqrt();
      Eigen::MatrixXd dd = Eigen::MatrixXd::Zero(nd, nd);
      Eigen::MatrixXd cross;
      if (nd > 0) {
        const Eigen::MatrixXd gdw = sw.asDiagonal() * gd_;
        dd.selfadjointView<Eigen::Lower>().rankUpdate(gdw.transpose());
        dd = dd.selfadjointView<Eigen::Lower>();
      }
      const SpRowMat gsw = sw.asDiagonal() * gs_;
      if (nd > 0) cross = SpMat(gsw).transpose() * (sw.asDiagonal() * gd_);  // ns x nd
      const SpMat ss = SpMat(gsw).transpose() * SpMat(gsw);

      const double fill = static_cast<double>(ss.nonZeros()) + 2.0 * static_cast<double>(cross.size()) +
                          static_cast<double>(dd.size());
      normal_dense_ = fill > 0.2 * static_cast<double>(n_) * static_cast<double>(n_);
      if (normal_dense_) {
        Eigen::MatrixXd md = prob_.P;
        for (Eigen::Index a = 0; a < nd; ++a)
          for (Eigen::Index b = 0; b < nd; ++b) md(dense_cols_[a], dense_cols_[b]) += dd(a, b);
        for (Eigen::Index a = 0; a < cross.rows(); ++a)
          for (Eigen::Index b = 0; b < nd; ++b) {
            md(sparse_cols_[a], dense_cols_[b]) += cross(a, b);
            md(dense_cols_[b], sparse_cols_[a]) += cross(a, b);
          }
        for (Eigen::Index j = 0; j < ss.outerSize(); ++j)
          for (SpMat::InnerIterator it(ss, j); it; ++it) md(sparse_cols_[it.row()], sparse_cols_[j]) += it.value();
        return factor_dense(std::move(md));
      }
      std::vector<Eigen::Triplet<double>> trip;
      for (Eigen::Index j = 0; j < p_sparse_.outerSize(); ++j)
        for (SpMat::InnerIterator it(p_sparse_, j); it; ++it) trip.emplace_back(it.row(), j, it.value());
      for (Eigen::Index a = 0; a < nd; ++a)
        for (Eigen::Index b = 0; b < nd; ++b) trip.emplace_back(dense_cols_[a], dense_cols_[b], dd(a, b));
      for (Eigen::Index a = 0; a < cross.rows(); ++a)
        for (Eigen::Index b = 0; b < nd; ++b) {
          trip.emplace_back(sparse_cols_[a], dense_cols_[b], cross(a, b));
          trip.emplace_back(dense_cols_[b], sparse_cols_[a], cross(a, b));
        }
      for (Eigen::Index j = 0; j < ss.outerSize(); ++j)
        for (SpMat::InnerIterator it(ss, j); it; ++it) trip.emplace_back(sparse_cols_[it.row()], sparse_cols_[j], it.value());
      SpMat m(n_, n_);
      m.setFromTriplets(trip.begin(), trip.end());
      double reg = 0.0;
      for (int attempt = 0; attempt < 8; ++attempt) {
        sldlt_.compute(reg > 0.0 ? SpMat(m + reg * eye_) : m);
        if (sldlt_.info() == Eigen::Success) return true;
        reg = reg == 0.0 ? 1e-12 : reg * 100.0;
      }
      return false;
    }
  }

  bool factor_dense(Eigen::MatrixXd md) {
    const double base = std::max(1.0, md.diagonal().cwiseAbs().maxCoeff());
    double reg = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
      if (reg > 0.0) md.diagonal().array() += reg;
      dllt_.compute(md);
      if (dllt_.info() == Eigen::Success) return true;
      reg = reg == 0.0 ? 1e-14 * base : reg * 100.0;
    }
    return false;
  }

  Vec solve_normal(const Vec& rhs) const { return normal_dense_ ? Vec(dllt_.solve(rhs)) : Vec(sldlt_.solve(rhs)); }

  // ---- ADMM ----

  QpSolution run_admm() {
    Vec x = best_.x.size() ? best_.x : s_.warm_start ? *s_.warm_start : Vec::Zero(n_);
    Vec y = Vec::Zero(m_);
    Vec z = (G_ * x).cwiseMin(h_);
    if constexpr (kDense) {
      gtg_dense_ = G_.transpose() * G_;
    } else {
      SpMat gc(G_);
      gtg_ = (gc.transpose() * gc).pruned();
    }
    factor_admm();

    const double alpha = s_.relaxation;
    double last_polish_residual = std::numeric_limits<double>::infinity();
    int last_polish_iter = 0;
    const int start = iterations_;
    const int limit = s_.max_iterations;
    Vec y_prev(m_), rhs(n_), xt(n_), zt(m_), zh(m_);

    for (int k = 1; start + k <= limit; ++k) {
      y_prev = y;
      rhs.noalias() = s_.sigma * x - prob_.q;
      rhs.noalias() += G_.transpose() * (rho_ * z - y);
      xt = solve_admm(rhs);
      zt.noalias() = G_ * xt;
      x = alpha * xt + (1.0 - alpha) * x;
      zh = alpha * zt + (1.0 - alpha) * z;
      Vec z_new = (zh + y / rho_).cwiseMin(h_);
      y += rho_ * (zh - z_new);
      z = std::move(z_new);
      iterations_ = start + k;

      if (k % s_.check_interval != 0 && iterations_ != limit) continue;

      if (accept(candidate(x, y))) return finish(QpStatus::optimal);
      if (infeasible(y - y_prev)) return finish(QpStatus::infeasible);

      const Vec gx = G_ * x;
      const Vec px = prob_.P * x;
      const Vec gty = G_.transpose() * y;
      const double rp = inf_norm(gx - z) / std::max({inf_norm(gx), inf_norm(z), 1e-12});
      const double rd =
          inf_norm(px + prob_.q + gty) / std::max({inf_norm(px), inf_norm(gty), inf_norm(prob_.q), 1e-12});
      const double rel = std::max(rp, rd);

      if (rel < 1e-3 && (rel < 0.1 * last_polish_residual || k - last_polish_iter >= 20 * s_.check_interval)) {
        last_polish_residual = rel;
        last_polish_iter = k;
        std::vector<char> active(static_cast<std::size_t>(m_));
        for (Eigen::Index i = 0; i < m_; ++i) active[static_cast<std::size_t>(i)] = h_[i] - z[i] < y[i];
        if (accept(polish(active, x, y))) return finish(QpStatus::optimal);
      }

      // Residual balancing: rebalance once one residual dominates by 10x.
      if (rp > 10.0 * rd || rd > 10.0 * rp) {
        const double ratio = std::sqrt(std::max(rp, 1e-16) / std::max(rd, 1e-16));
        const double rho_new = std::clamp(rho_ * ratio, 1e-6, 1e6);
        if (rho_new != rho_) {
          rho_ = rho_new;
          factor_admm();
        }
      }
    }
    std::vector<char> active(static_cast<std::size_t>(m_));
    for (Eigen::Index i = 0; i < m_; ++i) active[static_cast<std::size_t>(i)] = h_[i] - z[i] < y[i];
    if (accept(polish(active, x, y))) return finish(QpStatus::optimal);
    return finish(QpStatus::max_iterations);
  }

  void factor_admm() {
    if constexpr (kDense) {
      Eigen::MatrixXd k = prob_.P + rho_ * gtg_dense_;
      k.diagonal().array() += s_.sigma;
      llt_.compute(k);
      if (llt_.info() != Eigen::Success) throw Error("QP: KKT factorization failed (is P positive semidefinite?)");
    } else {
      SpMat k = p_sparse_ + rho_ * gtg_ + s_.sigma * eye_;
      if (!analyzed_) {
        sllt_.analyzePattern(k);
        analyzed_ = true;
      }
      sllt_.factorize(k);
      if (sllt_.info() != Eigen::Success) throw Error("QP: KKT factorization failed (is P positive semidefinite?)");
    }
  }

  Vec solve_admm(const Vec& rhs) {
    if constexpr (kDense) {
      return llt_.solve(rhs);
    } else {
      return sllt_.solve(rhs);
    }
  }

  bool infeasible(const Vec& dy) {
    if (dy.size() == 0 || dy.minCoeff() < -s_.infeasibility_tol * inf_norm(dy)) return false;
    return farkas(dy.cwiseMax(0.0));
  }

  // y >= 0 with G'y ~ 0 and h'y < 0 proves Gx <= h has no solution.
  bool farkas(const Vec& y) {
    const double ny = inf_norm(y);
    if (!(ny > 1e-14) || !std::isfinite(ny)) return false;
    const double eps = s_.infeasibility_tol * ny;
    if (!(h_.dot(y) < -eps)) return false;
    if (inf_norm(G_.transpose() * y) > eps) return false;
    Vec cert = (y.array() / scale_.array()).matrix();
    certificate_ = cert / inf_norm(cert);
    return true;
  }

  // ---- certificates and polishing ----

  // Scaled multipliers y map to lambda = y / row_scale in the original rows.
  Candidate candidate(const Vec& x, const Vec& y_scaled) const {
    Candidate c;
    c.x = x;
    c.lambda = (y_scaled.array() / scale_.array()).max(0.0).matrix();
    c.res = kkt_residuals(prob_, c.x, c.lambda);
    c.score = certificate_score(c.res, s_);
    return c;
  }

  bool accept(Candidate c) {
    const bool ok = c.score <= 1.0;
    if (c.score < best_.score || (ok && !(best_.score <= 1.0)) || !best_.x.size()) {
      best_ = std::move(c);
      best_polished_ = polishing_;
    }
    return ok;
  }

  // Solves the equality-constrained QP on the active rows `act` by a
  // regularized KKT factorization with iterative refinement. Returns the
  // primal solution and the scaled multipliers of the active rows.
  bool solve_active(const std::vector<Eigen::Index>& act, const Vec& x0, const Vec& y0, Vec& x, Vec& ya) const {
    const auto k = static_cast<Eigen::Index>(act.size());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(2 * (n_ + k)));
    for (Eigen::Index j = 0; j < n_ + k; ++j) trip.emplace_back(j, j, 0.0);  // keeps the diagonal stored
    for (Eigen::Index j = 0; j < n_; ++j)
      for (SpMat::InnerIterator it(p_sparse_, j); it; ++it)
        if (it.row() >= j) trip.emplace_back(it.row(), j, it.value());
    for (Eigen::Index r = 0; r < k; ++r) {
      const Eigen::Index row = act[static_cast<std::size_t>(r)];
      if constexpr (kDense) {
        for (Eigen::Index j = 0; j < n_; ++j)
          if (G_(row, j) != 0.0) trip.emplace_back(n_ + r, j, G_(row, j));
      } else {
        for (typename GMat::InnerIterator it(G_, row); it; ++it) trip.emplace_back(n_ + r, it.col(), it.value());
      }
    }
    SpMat kkt(n_ + k, n_ + k);
    kkt.setFromTriplets(trip.begin(), trip.end());
    Vec reg(n_ + k);
    reg.head(n_).setOnes();
    reg.tail(k).setConstant(-1.0);

    Vec rhs(n_ + k);
    rhs.head(n_) = -prob_.q;
    for (Eigen::Index r = 0; r < k; ++r) rhs[n_ + r] = h_[act[static_cast<std::size_t>(r)]];

    // A tiny shift can be absorbed during elimination and leave an exact
    // zero pivot; retry with larger shifts, refinement restores accuracy.
    for (double delta = s_.polish_regularization; delta <= 1e-5; delta *= 100.0) {
      SpMat shifted = kkt;
      shifted.diagonal() += delta * reg;
      Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt(shifted);
      if (ldlt.info() != Eigen::Success) continue;
      // Refinement from (x0, y0) is a proximal-point iteration: on a singular
      // active set it settles on the solution nearest the starting point.
      Vec sol(n_ + k);
      sol.head(n_) = x0;
      for (Eigen::Index r = 0; r < k; ++r) sol[n_ + r] = y0[act[static_cast<std::size_t>(r)]];
      double last = std::numeric_limits<double>::infinity();
      for (int it = 0; it < 50; ++it) {
        const Vec res = rhs - kkt.selfadjointView<Eigen::Lower>() * sol;
        const double r = inf_norm(res);
        if (r == 0.0 || !(r < 0.9 * last)) break;
        last = r;
        sol += ldlt.solve(res);
      }
      if (!sol.allFinite()) continue;
      x = sol.head(n_);
      ya = sol.tail(k);
      return true;
    }
    return false;
  }

  // Active-set refinement: solve the equality QP on the guessed active rows,
  // then drop rows with negative multipliers and add violated rows.
  Candidate polish(std::vector<char> active, Vec x0, Vec y0) {
    polishing_ = true;
    Candidate best;
    int stale = 0;
    for (int pass = 0; pass < 25 && stale < 3; ++pass) {
      std::vector<Eigen::Index> act;
      for (Eigen::Index i = 0; i < m_; ++i)
        if (active[static_cast<std::size_t>(i)]) act.push_back(i);
      Vec x, ya;
      if (!solve_active(act, x0, y0, x, ya)) break;
      Vec yfull = Vec::Zero(m_);
      for (std::size_t r = 0; r < act.size(); ++r) yfull[act[r]] = ya[static_cast<Eigen::Index>(r)];

      x0 = x;
      y0 = yfull;
      Candidate c = candidate(x, yfull);
      const bool done = c.score <= 1.0;
      if (c.score < 0.5 * best.score) {
        stale = 0;
      } else {
        ++stale;
      }
      if (c.score < best.score) best = std::move(c);
      if (done) break;

      const Vec viol = G_ * x - h_;
      const double tol_y = 1e-3 * s_.opt_tol;
      const double tol_v = 1e-3 * s_.feas_tol;
      bool changed = false;
      for (Eigen::Index i = 0; i < m_; ++i) {
        auto& a = active[static_cast<std::size_t>(i)];
        const char next = a ? static_cast<char>(yfull[i] >= -tol_y) : static_cast<char>(viol[i] > tol_v);
        changed |= next != a;
        a = next;
      }
      if (!changed) break;
    }
    polishing_ = false;
    return best;
  }

  QpSolution finish(QpStatus status) const {
    QpSolution sol;
    sol.status = status;
    sol.iterations = iterations_;
    sol.x = best_.x.size() ? best_.x : Vec::Zero(n_);
    sol.lambda = best_.x.size() ? best_.lambda : Vec::Zero(m_);
    const KktResiduals res = best_.x.size() ? best_.res : kkt_residuals(prob_, sol.x, sol.lambda);
    sol.primal_residual = res.primal;
    sol.dual_residual = res.dual;
    sol.complementarity = res.complementarity;
    sol.objective = prob_.objective(sol.x);
    sol.polished = best_polished_;
    if (status == QpStatus::infeasible) sol.infeasibility_certificate = certificate_;
    return sol;
  }

  const QpProblem& prob_;
  const QpSettings& s_;
  GMat G_;
  Vec h_;
  Vec scale_;
  Eigen::Index n_, m_;
  double rho_;
  int iterations_ = 0;
  SpMat p_sparse_, eye_;
  std::vector<Eigen::Index> dense_cols_, sparse_cols_;
  Eigen::MatrixXd gd_;
  SpRowMat gs_;

  bool normal_dense_ = true;
  Eigen::LLT<Eigen::MatrixXd> dllt_;
  Eigen::SimplicialLDLT<SpMat> sldlt_;

  Eigen::MatrixXd gtg_dense_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  SpMat gtg_;
  Eigen::SimplicialLLT<SpMat> sllt_;
  bool analyzed_ = false;

  Candidate best_;
  bool best_polished_ = false;
  bool polishing_ = false;
  Vec certificate_;
  bool ipm_infeasible_ = false;
};

}  // namespace

void QpProblem::validate() const {
  const auto n = q.size();
  if (P.rows() != n || P.cols() != n) throw Error(fmt::format("QP: P must be {}x{}", n, n));
  if (G.cols() != n || G.rows() != h.size())
    throw Error(fmt::format("QP: G is {}x{} but expected {}x{}", G.rows(), G.cols(), h.size(), n));
  if (!P.allFinite() || !q.allFinite() || !G.allFinite() || !h.allFinite()) throw Error("QP: non-finite data");
  if (n > 0) {
    const double asym = (P - P.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, P.cwiseAbs().maxCoeff())) throw Error("QP: P is not symmetric");
  }
}

double QpProblem::objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(P * x) + q.dot(x); }

std::string_view to_string(QpStatus status) noexcept {
  switch (status) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::max_iterations: return "max_iterations";
  }
  return "unknown";
}

KktResiduals kkt_residuals(const QpProblem& p, const Eigen::VectorXd& x, const Eigen::VectorXd& lambda) {
  KktResiduals r;
  const Vec lam = lambda.cwiseMax(0.0);
  const Vec slack = p.G * x - p.h;
  r.primal = slack.size() ? std::max(0.0, slack.maxCoeff()) : 0.0;
  r.dual = inf_norm(p.P * x + p.q + p.G.transpose() * lam);
  r.complementarity = slack.size() ? (lam.array() * slack.array()).abs().maxCoeff() : 0.0;
  return r;
}

QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings) {
  problem.validate();
  if (!(settings.feas_tol > 0.0) || !(settings.opt_tol > 0.0)) throw Error("QP: tolerances must be positive");
  if (settings.max_iterations < 0 || settings.check_interval < 1) throw Error("QP: invalid iteration settings");

  const auto m = problem.num_constraints();
  const auto n = problem.num_variables();
  Vec scale(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double nr = problem.G.row(i).norm();
    scale[i] = nr > 0.0 ? nr : 1.0;
  }
  Eigen::MatrixXd gs = scale.cwiseInverse().asDiagonal() * problem.G;
  Vec hs = problem.h.cwiseQuotient(scale);

  const auto nnz = (gs.array() != 0.0).count();
  const double density = m * n > 0 ? static_cast<double>(nnz) / static_cast<double>(m * n) : 1.0;
  if (density < 0.25 && m * n > 10'000) {
    SpRowMat gsp = gs.sparseView();
    gs.resize(0, 0);
    Solver<SpRowMat> solver(problem, std::move(gsp), std::move(hs), std::move(scale), settings);
    return solver.run();
  }
  Solver<Eigen::MatrixXd> solver(problem, std::move(gs), std::move(hs), std::move(scale), settings);
  return solver.run();
}

// ---------------------------------------------------------------------------

namespace {

void write_block(std::ostream& out, const char* name, const Eigen::MatrixXd& m) {
  out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << fmt::format("{:.17g}", m(i, j));
    out << '\n';
  }
}

Eigen::MatrixXd read_block(std::istream& in, const std::string& expected) {
  std::string name;
  Eigen::Index rows = 0, cols = 0;
  if (!(in >> name >> rows >> cols) || name != expected || rows < 0 || cols < 0)
    throw Error(fmt::format("QP dump: expected block header '{} <rows> <cols>'", expected));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      if (!(in >> m(i, j))) throw Error(fmt::format("QP dump: truncated block {}", expected));
  return m;
}

}  // namespace

void write_qp_dump(std::ostream& out, const QpProblem& problem) {
  write_block(out, "P", problem.P);
  write_block(out, "q", problem.q);
  write_block(out, "G", problem.G);
  write_block(out, "h", problem.h);
}

QpProblem read_qp_dump(std::istream& in) {
  QpProblem p;
  p.P = read_block(in, "P");
  p.q = read_block(in, "q").reshaped();
  p.G = read_block(in, "G");
  p.h = read_block(in, "h").reshaped();
  p.validate();
  return p;
}

}  // namespace minlip
