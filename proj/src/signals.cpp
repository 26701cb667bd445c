#include "minlip/signals.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "minlip/error.hpp"

namespace minlip {

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Multiplies `poly` (ascending powers of q^-1) by the monic factor(s) of `root`.
void multiply_root(std::vector<double>& poly, std::complex<double> root) {
  std::vector<double> factor;
  if (root.imag() == 0.0) {
    factor = {1.0, -root.real()};
  } else {
    factor = {1.0, -2.0 * root.real(), std::norm(root)};
  }
  std::vector<double> out(poly.size() + factor.size() - 1, 0.0);
  for (std::size_t i = 0; i < poly.size(); ++i)
    for (std::size_t j = 0; j < factor.size(); ++j) out[i + j] += poly[i] * factor[j];
  poly = std::move(out);
}

// Direct-form difference equation a_0 y_t = sum b_k x_{t-k} - sum_{k>=1} a_k y_{t-k}.
std::vector<double> run_recursion(const TransferFunction& sys, std::span<const double> x) {
  const auto& b = sys.numerator;
  const auto& a = sys.denominator;
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t t = 0; t < x.size(); ++t) {
    double acc = 0.0;
    for (std::size_t k = 0; k < b.size() && k <= t; ++k) acc += b[k] * x[t - k];
    for (std::size_t k = 1; k < a.size() && k <= t; ++k) acc -= a[k] * y[t - k];
    y[t] = acc / a[0];
  }
  return y;
}

// Cascade of one first- or second-order section per stored root.
std::vector<double> run_sections(const PoleZeroSystem& sys, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  for (auto z : sys.zero_pairs) {
    TransferFunction section;
    multiply_root(section.numerator, z);
    y = run_recursion(section, y);
  }
  for (auto p : sys.pole_pairs) {
    TransferFunction section;
    multiply_root(section.denominator, p);
    y = run_recursion(section, y);
  }
  for (double& v : y) v *= sys.gain;
  return y;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto next = line.find(',', pos);
    out.push_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw Error(fmt::format("signal csv line {}: cannot parse '{}'", line_no, field));
  return value;
}

}  // namespace

TimeSeries::TimeSeries(std::vector<double> values, std::int64_t start_index)
    : values_(std::move(values)), start_index_(start_index) {
  if (!all_finite(values_)) throw Error("time series contains non-finite samples");
}

bool PoleZeroSystem::is_stable() const noexcept {
  return std::all_of(pole_pairs.begin(), pole_pairs.end(), [](auto p) { return std::abs(p) < 1.0; });
}

bool TransferFunction::is_stable() const {
  if (denominator.empty() || denominator.front() == 0.0) return false;
  auto deg = denominator.size() - 1;
  while (deg > 0 && denominator[deg] == 0.0) --deg;
  if (deg == 0) return true;
  // Poles are the roots of z^deg A(z^-1) = a_0 z^deg + a_1 z^{deg-1} + ... + a_deg.
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(deg), static_cast<Eigen::Index>(deg));
  for (std::size_t k = 0; k < deg; ++k)
    companion(0, static_cast<Eigen::Index>(k)) = -denominator[k + 1] / denominator[0];
  for (std::size_t k = 1; k < deg; ++k)
    companion(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - 1)) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  return (es.eigenvalues().array().abs() < 1.0).all();
}

TransferFunction to_transfer_function(const PoleZeroSystem& sys) {
  TransferFunction tf;
  for (auto z : sys.zero_pairs) multiply_root(tf.numerator, z);
  for (auto p : sys.pole_pairs) multiply_root(tf.denominator, p);
  for (double& b : tf.numerator) b *= sys.gain;
  return tf;
}

FirSystem::FirSystem(Eigen::VectorXd taps) : taps_(std::move(taps)) {
  if (taps_.size() < 1) throw Error("FIR system needs at least one tap");
  if (!taps_.allFinite()) throw Error("FIR taps must be finite");
}

// ---------------------------------------------------------------------------

Nonlinearity Nonlinearity::smooth_tanh() { return {Kind::smooth_tanh, {}}; }

Nonlinearity Nonlinearity::step_quantizer(std::vector<double> thresholds) {
  if (!all_finite(thresholds)) throw Error("quantizer thresholds must be finite");
  std::sort(thresholds.begin(), thresholds.end());
  return {Kind::step_quantizer, std::move(thresholds)};
}

Nonlinearity Nonlinearity::identity() { return {Kind::identity, {}}; }

Nonlinearity Nonlinearity::piecewise_linear(std::vector<double> knots_x, std::vector<double> knots_y) {
  if (knots_x.empty() || knots_x.size() != knots_y.size())
    throw Error("piecewise-linear nonlinearity needs matching, non-empty knot vectors");
  if (!all_finite(knots_x) || !all_finite(knots_y)) throw Error("knots must be finite");
  for (std::size_t i = 1; i < knots_x.size(); ++i) {
    if (!(knots_x[i] > knots_x[i - 1])) throw Error("knot abscissae must be strictly increasing");
    if (knots_y[i] < knots_y[i - 1]) throw Error("knot ordinates must be non-decreasing");
  }
  std::vector<double> params = std::move(knots_x);
  params.insert(params.end(), knots_y.begin(), knots_y.end());
  return {Kind::piecewise_linear, std::move(params)};
}

Nonlinearity Nonlinearity::from_name(std::string_view name) {
  if (name == "tanh") return smooth_tanh();
  if (name == "quantizer") return step_quantizer();
  if (name == "identity") return identity();
  throw Error(fmt::format("unknown nonlinearity '{}' (expected tanh, quantizer or identity)", name));
}

std::string Nonlinearity::name() const {
  switch (kind_) {
    case Kind::smooth_tanh: return "tanh";
    case Kind::step_quantizer: return "quantizer";
    case Kind::identity: return "identity";
    case Kind::piecewise_linear: return "piecewise_linear";
  }
  return "unknown";
}

double Nonlinearity::operator()(double x) const {
  switch (kind_) {
    case Kind::smooth_tanh:
      return 2.0 + std::tanh(5.0 * x + 2.0) + 0.5 * std::tanh(5.0 * x - 3.0);
    case Kind::step_quantizer:
      return static_cast<double>(std::count_if(params_.begin(), params_.end(), [x](double c) { return x > c; }));
    case Kind::identity:
      return x;
    case Kind::piecewise_linear: {
      const std::size_t k = params_.size() / 2;
      std::span<const double> xs(params_.data(), k), ys(params_.data() + k, k);
      if (x <= xs.front()) return ys.front();
      if (x >= xs.back()) return ys.back();
      auto hi = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
      const double w = (x - xs[hi - 1]) / (xs[hi] - xs[hi - 1]);
      return ys[hi - 1] + w * (ys[hi] - ys[hi - 1]);
    }
  }
  return x;
}

double eval_nonlinearity(const Nonlinearity& f, double x) { return f(x); }

// ---------------------------------------------------------------------------

PoleZeroSystem random_pole_zero(int pole_pairs, int zero_pairs, std::uint64_t seed) {
  if (pole_pairs < 1 || zero_pairs < 0) throw Error("random_pole_zero needs m_p >= 1 and m_z >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto draw = [&] {
    const double radius = std::sqrt(unif(rng));
    double u2 = unif(rng);
    while (u2 == 0.0) u2 = unif(rng);  // keep the angle in the open upper half-plane
    return std::polar(radius, std::numbers::pi * u2);
  };
  PoleZeroSystem sys;
  for (int i = 0; i < pole_pairs; ++i) sys.pole_pairs.push_back(draw());
  for (int i = 0; i < zero_pairs; ++i) sys.zero_pairs.push_back(draw());
  return sys;
}

FirSystem impulse_response(const TransferFunction& sys, std::size_t d) {
  if (d < 1) throw Error("impulse response length must be >= 1");
  if (!sys.is_stable()) throw Error("impulse_response: system is unstable (pole modulus >= 1)");
  std::vector<double> delta(d, 0.0);
  delta[0] = 1.0;
  auto h = run_recursion(sys, delta);
  return FirSystem(Eigen::Map<const Eigen::VectorXd>(h.data(), static_cast<Eigen::Index>(d)));
}

FirSystem impulse_response(const PoleZeroSystem& sys, std::size_t d) {
  if (!sys.is_stable()) throw Error("impulse_response: system is unstable (pole modulus >= 1)");
  if (d < 1) throw Error("impulse response length must be >= 1");
  std::vector<double> delta(d, 0.0);
  delta[0] = 1.0;
  const auto h = run_sections(sys, delta);
  return FirSystem(Eigen::Map<const Eigen::VectorXd>(h.data(), static_cast<Eigen::Index>(d)));
}

TimeSeries filter(const FirSystem& sys, const TimeSeries& u) {
  const auto& h = sys.taps();
  const auto x = u.values();
  std::vector<double> z(x.size(), 0.0);
  for (std::size_t t = 0; t < x.size(); ++t) {
    double acc = 0.0;
    const std::size_t kmax = std::min<std::size_t>(sys.order() - 1, t);
    for (std::size_t k = 0; k <= kmax; ++k) acc += h[static_cast<Eigen::Index>(k)] * x[t - k];
    z[t] = acc;
  }
  return TimeSeries(std::move(z), u.start_index());
}

TimeSeries filter(const TransferFunction& sys, const TimeSeries& u) {
  if (sys.denominator.empty() || sys.denominator.front() == 0.0)
    throw Error("transfer function needs a nonzero leading denominator coefficient");
  return TimeSeries(run_recursion(sys, u.values()), u.start_index());
}

TimeSeries filter(const PoleZeroSystem& sys, const TimeSeries& u) {
  return TimeSeries(run_sections(sys, u.values()), u.start_index());
}

TimeSeries filter(const LinearSystem& sys, const TimeSeries& u) {
  return std::visit([&](const auto& s) { return filter(s, u); }, sys);
}

double normalize_gain(const TimeSeries& z) {
  if (z.size() < 2) throw Error("normalize_gain needs at least two samples");
  const auto v = z.values();
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(v.size()));
  if (!(sd > 0.0)) throw Error("zero variance");
  return 1.0 / sd;
}

TimeSeries gaussian_input(std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> u(length);
  for (double& x : u) x = normal(rng);
  return TimeSeries(std::move(u));
}

WienerSimulation simulate_wiener(const LinearSystem& sys, const Nonlinearity& f, const TimeSeries& u,
                                 double sigma_e, std::uint64_t seed) {
  if (!(sigma_e >= 0.0)) throw Error("sigma_e must be non-negative");
  const TimeSeries raw = filter(sys, u);
  const double g = normalize_gain(raw);
  std::vector<double> z(raw.values().begin(), raw.values().end());
  for (double& x : z) x *= g;

  std::vector<double> e(z.size(), 0.0);
  if (sigma_e > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, sigma_e);
    for (double& x : e) x = normal(rng);
  }
  std::vector<double> y(z.size());
  for (std::size_t t = 0; t < z.size(); ++t) y[t] = f(z[t] + e[t]);

  return {TimeSeries(std::move(z), u.start_index()), TimeSeries(std::move(e), u.start_index()),
          TimeSeries(std::move(y), u.start_index()), g};
}

// ---------------------------------------------------------------------------

RegressorDataset build_regressors(const TimeSeries& u, const TimeSeries& y, std::size_t d, std::size_t burn_in) {
  if (d < 1) throw Error("model order d must be >= 1");
  if (u.size() != y.size()) throw Error("input and output lengths differ");
  if (u.size() < d) throw Error("insufficient samples");
  const std::size_t n_all = u.size() - d + 1;
  if (burn_in >= n_all) throw Error("insufficient samples");
  const std::size_t n = n_all - burn_in;

  RegressorDataset ds;
  ds.rows.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  ds.outputs.resize(static_cast<Eigen::Index>(n));
  ds.time_index.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t j = r + burn_in;
    for (std::size_t k = 0; k < d; ++k)
      ds.rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = u[d - 1 + j - k];
    ds.outputs[static_cast<Eigen::Index>(r)] = y[d - 1 + j];
    ds.time_index[r] = u.start_index() + static_cast<std::int64_t>(d - 1 + j);
  }
  return ds;
}

SortedDataset sort_by_output(RegressorDataset ds) {
  SortedDataset sd;
  const std::size_t n = ds.size();
  sd.perm.resize(n);
  for (std::size_t i = 0; i < n; ++i) sd.perm[i] = i;
  const auto& y = ds.outputs;
  std::stable_sort(sd.perm.begin(), sd.perm.end(), [&](std::size_t a, std::size_t b) {
    return y[static_cast<Eigen::Index>(a)] < y[static_cast<Eigen::Index>(b)];
  });
  sd.base = std::move(ds);
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i == n || sd.output(i) != sd.output(begin)) {
      sd.tie_groups.push_back({begin, i});
      begin = i;
    }
  }
  return sd;
}

// ---------------------------------------------------------------------------

void write_signal_csv(std::ostream& out, const SignalRecord& rec) {
  const std::size_t n = rec.u.size();
  if (rec.y.size() != n || (rec.z && rec.z->size() != n) || (rec.e && rec.e->size() != n))
    throw Error("signal columns differ in length");
  out << "t,u,y";
  if (rec.z) out << ",z";
  if (rec.e) out << ",e";
  out << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out << fmt::format("{},{:.17g},{:.17g}", rec.u.start_index() + static_cast<std::int64_t>(i), rec.u[i], rec.y[i]);
    if (rec.z) out << fmt::format(",{:.17g}", (*rec.z)[i]);
    if (rec.e) out << fmt::format(",{:.17g}", (*rec.e)[i]);
    out << '\n';
  }
}

SignalRecord read_signal_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("signal csv is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  };
  const auto ct = column("t"), cu = column("u"), cy = column("y"), cz = column("z"), ce = column("e");
  if (!ct || !cu || !cy) throw Error("signal csv header must contain t, u and y");

  std::vector<double> u, y, z, e;
  std::int64_t t0 = 0, prev = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != header.size())
      throw Error(fmt::format("signal csv line {}: expected {} fields, got {}", line_no, header.size(), fields.size()));
    const auto t = parse_number<std::int64_t>(fields[*ct], line_no);
    if (u.empty()) {
      t0 = t;
    } else if (t != prev + 1) {
      throw Error(fmt::format("signal csv line {}: time index must increase by one", line_no));
    }
    prev = t;
    u.push_back(parse_number<double>(fields[*cu], line_no));
    y.push_back(parse_number<double>(fields[*cy], line_no));
    if (cz) z.push_back(parse_number<double>(fields[*cz], line_no));
    if (ce) e.push_back(parse_number<double>(fields[*ce], line_no));
  }
  SignalRecord rec{TimeSeries(std::move(u), t0), TimeSeries(std::move(y), t0), std::nullopt, std::nullopt};
  if (cz) rec.z = TimeSeries(std::move(z), t0);
  if (ce) rec.e = TimeSeries(std::move(e), t0);
  return rec;
}

}  // namespace minlip
