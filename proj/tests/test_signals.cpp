#include <doctest.h>

#include <cmath>
#include <sstream>

#include "minlip/error.hpp"
#include "minlip/signals.hpp"
#include "oracles/impulse_product.hpp"

using namespace minlip;

namespace {

TimeSeries series(std::vector<double> v) { return TimeSeries(std::move(v)); }

std::vector<double> values(const TimeSeries& s) { return {s.values().begin(), s.values().end()}; }

FirSystem fir(std::vector<double> taps) {
  return FirSystem(Eigen::Map<const Eigen::VectorXd>(taps.data(), static_cast<Eigen::Index>(taps.size())));
}

}  // namespace

TEST_CASE("time series rejects non-finite samples") {
  CHECK_THROWS_AS(series({1.0, std::nan("")}), Error);
  CHECK_THROWS_AS(series({INFINITY}), Error);
  CHECK(series({}).empty());
}

TEST_CASE("random pole-zero systems") {
  const auto sys = random_pole_zero(20, 2, 11);
  CHECK(sys.pole_pairs.size() == 20);
  CHECK(sys.zero_pairs.size() == 2);
  CHECK(sys.gain == 1.0);
  for (auto p : sys.pole_pairs) {
    CHECK(std::abs(p) < 1.0);
    CHECK(p.imag() > 0.0);
  }
  for (auto z : sys.zero_pairs) CHECK(std::abs(z) < 1.0);
  CHECK(sys.is_stable());

  const auto again = random_pole_zero(20, 2, 11);
  CHECK(again.pole_pairs == sys.pole_pairs);
  CHECK(again.zero_pairs == sys.zero_pairs);
  CHECK(random_pole_zero(20, 2, 12).pole_pairs != sys.pole_pairs);

  const auto minimal = random_pole_zero(1, 0, 5);
  CHECK(minimal.pole_pairs.size() == 1);
  CHECK(to_transfer_function(minimal).numerator == std::vector<double>{1.0});
  CHECK(to_transfer_function(minimal).denominator.size() == 3);

  CHECK_THROWS_AS(random_pole_zero(0, 0, 1), Error);
  CHECK_THROWS_AS(random_pole_zero(1, -1, 1), Error);
}

TEST_CASE("pole radii are area-uniform") {
  // P(|p| < r) = r^2 under the area measure.
  int inside = 0, total = 0;
  for (std::uint64_t s = 0; s < 200; ++s)
    for (auto p : random_pole_zero(10, 0, s).pole_pairs) {
      inside += std::abs(p) < 0.5;
      ++total;
    }
  CHECK(static_cast<double>(inside) / total == doctest::Approx(0.25).epsilon(0.15));
}

TEST_CASE("impulse responses of elementary systems") {
  const double p = 0.6;
  PoleZeroSystem single{{std::complex<double>(p, 0.0)}, {}, 1.0};
  const auto h = impulse_response(single, 4).taps();
  CHECK(h[0] == doctest::Approx(1.0));
  CHECK(h[1] == doctest::Approx(p));
  CHECK(h[2] == doctest::Approx(p * p));
  CHECK(h[3] == doctest::Approx(p * p * p));

  TransferFunction delay{{0.0, 1.0}, {1.0}};
  const auto hd = impulse_response(delay, 4).taps();
  CHECK(hd == Eigen::Vector4d(0, 1, 0, 0));

  PoleZeroSystem unstable{{std::complex<double>(1.0, 0.0)}, {}, 1.0};
  CHECK_THROWS_AS(impulse_response(unstable, 4), Error);
  CHECK_THROWS_AS(impulse_response(TransferFunction{{1.0}, {1.0, -2.0}}, 4), Error);
}

TEST_CASE("impulse response matches the geometric-product oracle") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const auto sys = random_pole_zero(20, 2, seed);
    const auto h = impulse_response(sys, 200).taps();
    const auto ref = oracle::impulse_by_geometric_product(sys.pole_pairs, sys.zero_pairs, 200);
    CAPTURE(seed);
    CHECK((h - ref).cwiseAbs().maxCoeff() <= 1e-9 * ref.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("filtering an impulse reproduces the taps") {
  const auto sys = random_pole_zero(6, 2, 9);
  std::vector<double> delta(30, 0.0);
  delta[0] = 1.0;
  const auto z = filter(sys, series(delta));
  const auto h = impulse_response(sys, 30).taps();
  for (std::size_t k = 0; k < 30; ++k) CHECK(z[k] == h[static_cast<Eigen::Index>(k)]);
}

TEST_CASE("FIR filtering") {
  CHECK(values(filter(fir({1.0}), series({3, 1, 4}))) == std::vector<double>{3, 1, 4});
  CHECK(values(filter(fir({0.0, 1.0}), series({3, 1, 4}))) == std::vector<double>{0, 3, 1});
  CHECK(values(filter(fir({1.0, 2.0}), series({1, 1, 1}))) == std::vector<double>{1, 3, 3});
}

TEST_CASE("filtering is linear") {
  const auto sys = random_pole_zero(5, 1, 4);
  const auto u = gaussian_input(300, 1), v = gaussian_input(300, 2);
  const double a = 1.7, b = -0.4;
  std::vector<double> w(300);
  for (std::size_t t = 0; t < 300; ++t) w[t] = a * u[t] + b * v[t];
  const auto fu = filter(sys, u), fv = filter(sys, v), fw = filter(sys, series(w));
  double scale = 0.0, err = 0.0;
  for (std::size_t t = 0; t < 300; ++t) {
    scale = std::max(scale, std::abs(fw[t]));
    err = std::max(err, std::abs(fw[t] - (a * fu[t] + b * fv[t])));
  }
  CHECK(err <= 1e-10 * scale);
}

TEST_CASE("gain normalization") {
  std::vector<double> z;
  for (int i = 0; i < 10; ++i) z.insert(z.end(), {-2.0, 2.0});
  CHECK(normalize_gain(series(z)) == doctest::Approx(0.5));
  CHECK(normalize_gain(series({-1.0, 1.0})) == doctest::Approx(1.0));
  CHECK_THROWS_WITH_AS(normalize_gain(series({3.0, 3.0, 3.0})), "zero variance", Error);

  const auto w = gaussian_input(10000, 8);
  const double g = normalize_gain(w);
  std::vector<double> scaled(w.size());
  for (std::size_t t = 0; t < w.size(); ++t) scaled[t] = g * w[t];
  double mean = 0.0, ss = 0.0;
  for (double x : scaled) mean += x;
  mean /= static_cast<double>(scaled.size());
  for (double x : scaled) ss += (x - mean) * (x - mean);
  CHECK(std::abs(std::sqrt(ss / static_cast<double>(scaled.size())) - 1.0) < 1e-12);
}

TEST_CASE("nonlinearities") {
  const auto f = Nonlinearity::smooth_tanh();
  CHECK(f(0.0) == doctest::Approx(2.0 + std::tanh(2.0) + 0.5 * std::tanh(-3.0)).epsilon(1e-15));
  CHECK(f(0.0) == doctest::Approx(2.466500).epsilon(1e-6));

  const auto q = Nonlinearity::step_quantizer();
  CHECK(q(0.0) == 1.0);
  CHECK(q(-1.0) == 0.0);
  CHECK(q(3.0) == 2.0);
  CHECK(q(-0.5) == 0.0);
  CHECK(q(2.0) == 1.0);

  CHECK(Nonlinearity::identity()(7.5) == 7.5);
  CHECK(eval_nonlinearity(Nonlinearity::identity(), -1.25) == -1.25);

  const auto pl = Nonlinearity::piecewise_linear({0.0, 1.0}, {0.0, 2.0});
  CHECK(pl(0.5) == doctest::Approx(1.0));
  CHECK(pl(-3.0) == 0.0);
  CHECK(pl(9.0) == 2.0);
  CHECK_THROWS_AS(Nonlinearity::piecewise_linear({0.0, 1.0}, {1.0, 0.0}), Error);

  CHECK(Nonlinearity::from_name("tanh").kind() == Nonlinearity::Kind::smooth_tanh);
  CHECK(Nonlinearity::from_name("quantizer").kind() == Nonlinearity::Kind::step_quantizer);
  CHECK_THROWS_AS(Nonlinearity::from_name("cubic"), Error);
}

TEST_CASE("built-in nonlinearities are monotone on a dense grid") {
  for (const auto& f : {Nonlinearity::smooth_tanh(), Nonlinearity::step_quantizer(), Nonlinearity::identity(),
                        Nonlinearity::piecewise_linear({-1.0, 0.0, 4.0}, {-2.0, 0.0, 0.5})}) {
    double prev = f(-10.0);
    bool monotone = true;
    for (int i = 1; i < 10000; ++i) {
      const double v = f(-10.0 + 20.0 * i / 9999.0);
      monotone = monotone && v >= prev;
      prev = v;
    }
    CAPTURE(f.name());
    CHECK(monotone);
  }
}

TEST_CASE("Wiener simulation") {
  const auto u = gaussian_input(500, 3);
  const auto sys = random_pole_zero(4, 1, 3);

  const auto id = simulate_wiener(fir({1.0}), Nonlinearity::identity(), u, 0.0, 0);
  const double g = normalize_gain(u);
  for (std::size_t t = 0; t < u.size(); ++t) {
    CHECK(id.y[t] == id.z[t]);
    CHECK(id.z[t] == doctest::Approx(g * u[t]).epsilon(1e-14));
    CHECK(id.e[t] == 0.0);
  }

  const auto f = Nonlinearity::smooth_tanh();
  const auto sim = simulate_wiener(sys, f, u, 0.0, 0);
  for (std::size_t t = 0; t < u.size(); ++t) CHECK(sim.y[t] == f(sim.z[t]));
  CHECK(normalize_gain(sim.z) == doctest::Approx(1.0).epsilon(1e-12));

  const auto noisy = simulate_wiener(sys, f, u, 1.0, 5);
  CHECK(noisy.z == sim.z);
  CHECK(1.0 / normalize_gain(noisy.e) == doctest::Approx(1.0).epsilon(0.1));
  for (std::size_t t = 0; t < u.size(); ++t) CHECK(noisy.y[t] == f(noisy.z[t] + noisy.e[t]));
  CHECK(simulate_wiener(sys, f, u, 1.0, 5).y == noisy.y);
  CHECK_THROWS_AS(simulate_wiener(sys, f, u, -1.0, 5), Error);
}

TEST_CASE("regressor construction") {
  const auto u = series({1, 2, 3, 4});
  const auto y = series({10, 20, 30, 40});
  const auto ds = build_regressors(u, y, 2);
  REQUIRE(ds.size() == 3);
  CHECK(ds.rows == (Eigen::MatrixXd(3, 2) << 2, 1, 3, 2, 4, 3).finished());
  CHECK(ds.outputs == Eigen::Vector3d(20, 30, 40));
  CHECK(ds.time_index == std::vector<std::int64_t>{1, 2, 3});

  const auto d1 = build_regressors(u, y, 1);
  CHECK(d1.rows.col(0) == Eigen::Vector4d(1, 2, 3, 4));
  CHECK(d1.outputs == Eigen::Vector4d(10, 20, 30, 40));

  const auto dT = build_regressors(u, y, 4);
  REQUIRE(dT.size() == 1);
  CHECK(dT.rows.row(0) == Eigen::RowVector4d(4, 3, 2, 1));
  CHECK(dT.outputs[0] == 40);

  CHECK_THROWS_WITH_AS(build_regressors(u, y, 5), "insufficient samples", Error);
  CHECK(build_regressors(u, y, 2, 1).size() == 2);
}

TEST_CASE("regressor rows have the Hankel shift structure") {
  const auto u = gaussian_input(120, 4);
  const auto ds = build_regressors(u, u, 7);
  CHECK(ds.size() == 114);
  for (Eigen::Index j = 0; j + 1 < ds.rows.rows(); ++j)
    CHECK(ds.rows.row(j + 1).tail(6) == ds.rows.row(j).head(6));
}

TEST_CASE("sorting by output") {
  RegressorDataset ds;
  ds.rows = Eigen::Vector3d(0, 1, 2);
  ds.outputs = Eigen::Vector3d(3, 1, 2);
  auto sd = sort_by_output(ds);
  CHECK(sd.perm == std::vector<std::size_t>{1, 2, 0});
  CHECK(sd.tie_groups.size() == 3);
  for (std::size_t i = 0; i + 1 < sd.size(); ++i) CHECK(sd.output(i) <= sd.output(i + 1));

  ds.outputs = Eigen::Vector3d(0, 0, 1);
  sd = sort_by_output(ds);
  CHECK(sd.perm == std::vector<std::size_t>{0, 1, 2});
  CHECK(sd.tie_groups == std::vector<TieGroup>{{0, 2}, {2, 3}});

  const auto u = gaussian_input(200, 6);
  const auto q = simulate_wiener(fir({1.0, 0.5}), Nonlinearity::step_quantizer(), u, 0.0, 0);
  const auto big = build_regressors(u, q.y, 3);
  const auto a = sort_by_output(big), b = sort_by_output(big);
  CHECK(a.perm == b.perm);
  std::size_t covered = 0;
  for (const auto& g : a.tie_groups) {
    for (std::size_t i = g.begin; i < g.end; ++i) CHECK(a.output(i) == a.output(g.begin));
    for (std::size_t i = g.begin + 1; i < g.end; ++i) CHECK(a.perm[i] > a.perm[i - 1]);  // stable
    covered += g.size();
  }
  CHECK(covered == big.size());
}

TEST_CASE("signal CSV round trip") {
  const auto u = gaussian_input(20, 1);
  const auto sim = simulate_wiener(fir({1.0, -0.3}), Nonlinearity::smooth_tanh(), u, 0.2, 4);
  std::stringstream buf;
  write_signal_csv(buf, {u, sim.y, sim.z, sim.e});
  CHECK(buf.str().rfind("t,u,y,z,e\n", 0) == 0);
  const auto rec = read_signal_csv(buf);
  CHECK(rec.u == u);
  CHECK(rec.y == sim.y);
  REQUIRE(rec.z);
  CHECK(*rec.z == sim.z);

  std::stringstream minimal("t,y,u\n5,1.5,2\n6,2.5,3\n");
  const auto m = read_signal_csv(minimal);
  CHECK(values(m.u) == std::vector<double>{2, 3});
  CHECK(values(m.y) == std::vector<double>{1.5, 2.5});
  CHECK(m.u.start_index() == 5);
  CHECK(!m.z);

  std::stringstream gap("t,u,y\n0,1,1\n2,1,1\n");
  CHECK_THROWS_AS(read_signal_csv(gap), Error);
  std::stringstream nohdr("t,u\n0,1\n");
  CHECK_THROWS_AS(read_signal_csv(nohdr), Error);
}
