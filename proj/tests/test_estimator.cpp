#include <doctest.h>

#include <cmath>
#include <random>

#include "minlip/error.hpp"
#include "minlip/estimator.hpp"
#include "minlip/signals.hpp"

using namespace minlip;

namespace {

RegressorDataset make_ds(const Eigen::MatrixXd& rows, const Eigen::VectorXd& y) {
  RegressorDataset ds;
  ds.rows = rows;
  ds.outputs = y;
  for (Eigen::Index i = 0; i < y.size(); ++i) ds.time_index.push_back(i);
  return ds;
}

RegressorDataset linear_ds(std::size_t T, std::size_t d, std::uint64_t seed, Eigen::VectorXd* a0_out = nullptr) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Eigen::VectorXd a0(static_cast<Eigen::Index>(d));
  for (auto& v : a0) v = n01(rng);
  a0.normalize();
  const TimeSeries u = gaussian_input(T + d, seed + 1);
  std::vector<double> y(u.size(), 0.0);
  for (std::size_t t = d - 1; t < u.size(); ++t)
    for (std::size_t k = 0; k < d; ++k) y[t] += a0[static_cast<Eigen::Index>(k)] * u[t - k];
  if (a0_out) *a0_out = a0;
  return build_regressors(u, TimeSeries(y), d);
}

// Wiener data through a monotone cubic-ish map; outputs distinct.
RegressorDataset wiener_ds(std::size_t T, std::size_t d, std::uint64_t seed, double scale = 1.0) {
  const TimeSeries u0 = gaussian_input(T + d, seed);
  std::vector<double> uv(u0.values().begin(), u0.values().end());
  for (auto& v : uv) v *= scale;
  const TimeSeries u(uv);
  std::mt19937_64 rng(seed ^ 0x5555);
  std::normal_distribution<double> n01;
  std::vector<double> h(d);
  for (auto& v : h) v = n01(rng);
  std::vector<double> y(u.size(), 0.0);
  for (std::size_t t = d - 1; t < u.size(); ++t) {
    double z = 0.0;
    for (std::size_t k = 0; k < d; ++k) z += h[k] * u[t - k] / scale;
    y[t] = z + 0.3 * std::tanh(z);
  }
  return build_regressors(u, TimeSeries(y), d);
}

bool constraints_hold(const SortedDataset& sd, const ConstraintSystem& cs, const Eigen::VectorXd& a, double tol) {
  for (const auto& r : cs.rows) {
    const double lhs = sd.output(r.upper) - sd.output(r.lower);
    const double rhs = (sd.row(r.upper) - sd.row(r.lower)).dot(a);
    if (lhs > rhs + tol) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("consecutive builder pairs sorted neighbours") {
  Eigen::MatrixXd rows(3, 1);
  rows << 1, 2, 3;
  const auto sd = sort_by_output(make_ds(rows, Eigen::Vector3d(5, 1, 3)));
  const auto cs = build_consecutive_constraints(sd);
  REQUIRE(cs.size() == 2);
  CHECK(cs.rows[0] == ConstraintRow{0, 1, ConstraintProvenance::consecutive});
  CHECK(cs.rows[1] == ConstraintRow{1, 2, ConstraintProvenance::consecutive});

  Eigen::MatrixXd one(1, 1);
  one << 1;
  CHECK(build_consecutive_constraints(sort_by_output(make_ds(one, Eigen::VectorXd::Ones(1)))).size() == 0);

  CHECK_THROWS_AS(build_consecutive_constraints(sort_by_output(make_ds(rows, Eigen::Vector3d(0, 0, 1)))), Error);
}

TEST_CASE("difference matrix") {
  Eigen::MatrixXd expected(2, 3);
  expected << -1, 1, 0, 0, -1, 1;
  CHECK(difference_matrix(3) == expected);
}

TEST_CASE("consecutive QP equals the difference-matrix form") {
  const auto ds = linear_ds(30, 3, 7);
  const auto sd = sort_by_output(ds);
  const auto qp = minlip_qp(sd, build_consecutive_constraints(sd));
  Eigen::MatrixXd us(static_cast<Eigen::Index>(sd.size()), 3);
  Eigen::VectorXd ys(static_cast<Eigen::Index>(sd.size()));
  for (std::size_t i = 0; i < sd.size(); ++i) {
    us.row(static_cast<Eigen::Index>(i)) = sd.row(i);
    ys[static_cast<Eigen::Index>(i)] = sd.output(i);
  }
  const Eigen::MatrixXd delta = difference_matrix(sd.size());
  CHECK((qp.G + delta * us).cwiseAbs().maxCoeff() == 0.0);
  CHECK((qp.h + delta * ys).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tie builder") {
  Eigen::MatrixXd rows(4, 1);
  rows << 1, 2, 3, 4;

  SUBCASE("y=(0,0,1)") {
    const auto sd = sort_by_output(make_ds(rows.topRows(3), Eigen::Vector3d(0, 0, 1)));
    const auto cs = build_tie_constraints(sd);
    REQUIRE(cs.size() == 2);
    CHECK(cs.rows[0].lower == 0);
    CHECK(cs.rows[0].upper == 2);
    CHECK(cs.rows[1].lower == 1);
    CHECK(cs.rows[1].upper == 2);
    CHECK(cs.rows[0].provenance == ConstraintProvenance::tie_bridge);
  }
  SUBCASE("two levels of two") {
    const auto cs = build_tie_constraints(sort_by_output(make_ds(rows, Eigen::Vector4d(1, 0, 1, 0))));
    CHECK(cs.size() == 4);
  }
  SUBCASE("constant output") {
    CHECK_THROWS_WITH_AS(build_tie_constraints(sort_by_output(make_ds(rows, Eigen::Vector4d::Zero()))),
                         "output carries no ordering information", Error);
  }
  SUBCASE("distinct outputs reduce to consecutive") {
    const auto sd = sort_by_output(linear_ds(40, 2, 3));
    const auto tie = build_tie_constraints(sd);
    const auto cons = build_consecutive_constraints(sd);
    CHECK(tie.rows == cons.rows);
    const auto a = minlip_qp(sd, tie);
    const auto b = minlip_qp(sd, cons);
    CHECK(a.G == b.G);
    CHECK(a.h == b.h);
  }
  SUBCASE("never compares equal levels, pairs only adjacent levels") {
    Eigen::MatrixXd r(9, 1);
    r.col(0).setLinSpaced(9, 0, 8);
    Eigen::VectorXd y(9);
    y << 2, 0, 1, 1, 2, 0, 3, 1, 1;
    const auto sd = sort_by_output(make_ds(r, y));
    const auto cs = build_tie_constraints(sd);
    // levels sizes 2,4,2,1 -> 8 + 8 + 2
    CHECK(cs.size() == 18);
    for (const auto& row : cs.rows) {
      const double gap = sd.output(row.upper) - sd.output(row.lower);
      CHECK(gap == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("identify: one-tap example") {
  Eigen::MatrixXd rows(3, 1);
  rows << 1, 2, 3;
  const auto est = minlip_identify(make_ds(rows, Eigen::Vector3d(1, 2, 3)));
  CHECK(est.solver.status == QpStatus::optimal);
  CHECK(est.a[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(est.lipschitz_L == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(est.direction[0] == doctest::Approx(1.0));
  CHECK_FALSE(est.residuals_e.has_value());
  CHECK_FALSE(est.gamma.has_value());
}

TEST_CASE("identify: duplicate regressors with distinct outputs are infeasible") {
  Eigen::MatrixXd rows(3, 2);
  rows << 1, 0, 1, 0, 0, 1;
  CHECK_THROWS_AS(minlip_identify(make_ds(rows, Eigen::Vector3d(0, 1, 2))), InfeasibleError);
}

TEST_CASE("identify: noiseless linear system recovers the direction") {
  Eigen::VectorXd a0;
  const auto ds = linear_ds(200, 5, 11, &a0);
  const auto est = minlip_identify(ds);
  CHECK(est.solver.status == QpStatus::optimal);
  CHECK(est.direction.dot(a0) >= 1.0 - 1e-4);
  CHECK(est.direction.norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("identify: constraints satisfied and f_hat well formed") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto ds = wiener_ds(80, 4, seed);
    const auto est = minlip_identify(ds);
    const auto sd = sort_by_output(ds);
    CHECK(constraints_hold(sd, build_tie_constraints(sd), est.a, 1e-8));
    REQUIRE(est.f_hat.size() == ds.size());
    double max_slope = 0.0;
    for (std::size_t k = 1; k < est.f_hat.size(); ++k) {
      const auto& p = est.f_hat[k - 1];
      const auto& q = est.f_hat[k];
      CHECK(q.x >= p.x);
      CHECK(q.y >= p.y);
      if (q.y > p.y) max_slope = std::max(max_slope, (q.y - p.y) / (q.x - p.x));
    }
    CHECK(max_slope <= est.lipschitz_L + 1e-8);
  }
}

TEST_CASE("identify: minimal norm against feasible perturbations") {
  const auto ds = wiener_ds(60, 3, 21);
  const auto est = minlip_identify(ds);
  const auto sd = sort_by_output(ds);
  const auto cs = build_tie_constraints(sd);
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n01;
  const double base = est.a.squaredNorm();
  int tested = 0;
  for (int k = 0; k < 100; ++k) {
    Eigen::VectorXd delta(est.a.size());
    for (auto& v : delta) v = n01(rng);
    double t = 1.0;
    while (t > 1e-12 && !constraints_hold(sd, cs, est.a + t * delta, 1e-9)) t *= 0.5;
    if (t <= 1e-12) continue;
    ++tested;
    CHECK((est.a + t * delta).squaredNorm() >= base - 1e-6);
  }
  CHECK(tested > 0);
}

TEST_CASE("identify: sign flip and input scaling") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto ds = wiener_ds(70, 4, seed + 40);
    const auto est = minlip_identify(ds);

    auto flipped = ds;
    flipped.outputs = -ds.outputs;
    const auto neg = minlip_identify(flipped);
    CHECK((neg.a + est.a).cwiseAbs().maxCoeff() <= 1e-6);

    auto scaled = ds;
    scaled.rows *= 2.5;
    const auto sc = minlip_identify(scaled);
    CHECK((sc.a - est.a / 2.5).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("noisy variant") {
  const auto ds = wiener_ds(60, 3, 5);
  SUBCASE("large gamma matches the hard solution") {
    const auto hard = minlip_identify(ds);
    const auto soft = minlip_identify_noisy(ds, 1e8);
    CHECK(soft.solver.status == QpStatus::optimal);
    CHECK((soft.a - hard.a).cwiseAbs().maxCoeff() <= 1e-4);
    REQUIRE(soft.residuals_e.has_value());
    CHECK(soft.residuals_e->size() == static_cast<Eigen::Index>(ds.size()));
    CHECK(*soft.gamma == 1e8);
  }
  SUBCASE("tiny gamma shrinks a to zero") {
    const auto soft = minlip_identify_noisy(ds, 1e-8);
    CHECK(soft.a.norm() <= 1e-6);
    // residuals carry the ordering on their own
    const auto sd = sort_by_output(ds);
    for (std::size_t i = 0; i + 1 < sd.size(); ++i) {
      const auto lo = static_cast<Eigen::Index>(sd.perm[i]);
      const auto hi = static_cast<Eigen::Index>(sd.perm[i + 1]);
      CHECK((*soft.residuals_e)[hi] - (*soft.residuals_e)[lo] >= sd.output(i + 1) - sd.output(i) - 1e-6);
    }
  }
  SUBCASE("gamma must be positive") {
    CHECK_THROWS_AS(minlip_identify_noisy(ds, 0.0), Error);
    CHECK_THROWS_AS(minlip_identify_noisy(ds, -1.0), Error);
  }
  SUBCASE("feasible where the hard problem is not") {
    Eigen::MatrixXd rows(3, 2);
    rows << 1, 0, 1, 0, 0, 1;
    const auto est = minlip_identify_noisy(make_ds(rows, Eigen::Vector3d(0, 1, 2)), 10.0);
    CHECK(est.solver.status == QpStatus::optimal);
    for (std::size_t k = 1; k < est.f_hat.size(); ++k) CHECK(est.f_hat[k].x >= est.f_hat[k - 1].x);
  }
}

TEST_CASE("noisy QP layout") {
  Eigen::MatrixXd rows(3, 1);
  rows << 1, 2, 3;
  const auto sd = sort_by_output(make_ds(rows, Eigen::Vector3d(3, 1, 2)));
  const auto cs = build_tie_constraints(sd);
  const auto qp = minlip_noisy_qp(sd, cs, 4.0);
  CHECK(qp.num_variables() == 1 + 6);
  CHECK(qp.num_constraints() == 2 + 6);
  CHECK(qp.q.tail(6).isConstant(2.0));
  CHECK(qp.P(0, 0) == 1.0);
  CHECK(qp.P.bottomRightCorner(6, 6).isZero());
  // first row: sorted 0 -> original 1 (y=1), sorted 1 -> original 2 (y=2)
  CHECK(qp.G(0, 0) == -1.0);
  CHECK(qp.G(0, 1 + 2) == -1.0);
  CHECK(qp.G(0, 4 + 2) == 1.0);
  CHECK(qp.G(0, 1 + 1) == 1.0);
  CHECK(qp.G(0, 4 + 1) == -1.0);
  CHECK(qp.h[0] == -1.0);
}

TEST_CASE("reconstruct_f") {
  WienerEstimate est;
  est.lipschitz_L = 2.0;
  est.f_hat = {{0.0, 0.0}, {1.0, 2.0}};
  CHECK(reconstruct_f(est, 0.5) == doctest::Approx(1.0));
  CHECK(reconstruct_f(est, -3.0) == 0.0);
  CHECK(reconstruct_f(est, 7.0) == 2.0);

  const auto fit = minlip_identify(wiener_ds(60, 3, 8));
  double prev = -1e300;
  const double lo = fit.f_hat.front().x, hi = fit.f_hat.back().x;
  for (int k = 0; k <= 400; ++k) {
    const double q = lo - 0.5 + (hi - lo + 1.0) * k / 400.0;
    const double v = reconstruct_f(fit, q);
    CHECK(v >= prev);
    prev = v;
  }
  WienerEstimate empty;
  CHECK_THROWS_AS(reconstruct_f(empty, 0.0), Error);
}
