#pragma once

// Signal generation for Wiener-system experiments: random stable rational
// systems, FIR truncation, static nonlinearities, lagged regressor datasets
// and output sorting with tie groups.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace minlip {

/// Real-valued sampled signal. Holds finite samples only.
class TimeSeries {
 public:
  TimeSeries() = default;
  explicit TimeSeries(std::vector<double> values, std::int64_t start_index = 0);

  std::span<const double> values() const noexcept { return values_; }
  std::int64_t start_index() const noexcept { return start_index_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

 private:
  std::vector<double> values_;
  std::int64_t start_index_ = 0;
};

/// Rational system parametrized by its poles and zeros. Every complex root
/// is stored once and implies its conjugate; a root with zero imaginary part
/// stands for a single real root.
struct PoleZeroSystem {
  std::vector<std::complex<double>> pole_pairs;
  std::vector<std::complex<double>> zero_pairs;
  double gain = 1.0;

  bool is_stable() const noexcept;
};

/// B(q^-1) / A(q^-1) in ascending powers of the backshift operator.
struct TransferFunction {
  std::vector<double> numerator{1.0};
  std::vector<double> denominator{1.0};

  bool is_stable() const;
};

TransferFunction to_transfer_function(const PoleZeroSystem& sys);

/// Finite impulse response h_0, ..., h_{d-1}.
class FirSystem {
 public:
  explicit FirSystem(Eigen::VectorXd taps);

  const Eigen::VectorXd& taps() const noexcept { return taps_; }
  std::size_t order() const noexcept { return static_cast<std::size_t>(taps_.size()); }

 private:
  Eigen::VectorXd taps_;
};

using LinearSystem = std::variant<FirSystem, PoleZeroSystem, TransferFunction>;

/// Monotonically non-decreasing static map R -> R.
class Nonlinearity {
 public:
  enum class Kind { smooth_tanh, step_quantizer, identity, piecewise_linear };

  /// f(x) = 2 + tanh(5x + 2) + 0.5 tanh(5x - 3).
  static Nonlinearity smooth_tanh();
  /// f(z) = number of thresholds strictly below z; defaults to I(z > -0.5) + I(z > 2).
  static Nonlinearity step_quantizer(std::vector<double> thresholds = {-0.5, 2.0});
  static Nonlinearity identity();
  /// Linear interpolation through the knots, clamped outside them.
  static Nonlinearity piecewise_linear(std::vector<double> knots_x, std::vector<double> knots_y);
  /// Accepts "tanh", "quantizer" and "identity".
  static Nonlinearity from_name(std::string_view name);

  Kind kind() const noexcept { return kind_; }
  std::span<const double> parameters() const noexcept { return params_; }
  std::string name() const;

  double operator()(double x) const;

 private:
  Nonlinearity(Kind kind, std::vector<double> params) : kind_(kind), params_(std::move(params)) {}

  Kind kind_;
  // step_quantizer: sorted thresholds; piecewise_linear: x knots then y knots.
  std::vector<double> params_;
};

double eval_nonlinearity(const Nonlinearity& f, double x);

/// Draws `pole_pairs` conjugate pole pairs and `zero_pairs` conjugate zero
/// pairs uniformly (by area) over the open unit disk. Gain is 1.
PoleZeroSystem random_pole_zero(int pole_pairs, int zero_pairs, std::uint64_t seed);

FirSystem impulse_response(const TransferFunction& sys, std::size_t d);
/// Pole-zero systems run as a cascade of one section per stored root.
FirSystem impulse_response(const PoleZeroSystem& sys, std::size_t d);

/// Causal filtering with zero initial conditions: z_t uses u up to time t.
TimeSeries filter(const FirSystem& sys, const TimeSeries& u);
TimeSeries filter(const TransferFunction& sys, const TimeSeries& u);
TimeSeries filter(const PoleZeroSystem& sys, const TimeSeries& u);
TimeSeries filter(const LinearSystem& sys, const TimeSeries& u);

/// Gain g = 1 / stddev(z) (population standard deviation).
double normalize_gain(const TimeSeries& z);

/// I.i.d. standard Gaussian input of length T.
TimeSeries gaussian_input(std::size_t length, std::uint64_t seed);

struct WienerSimulation {
  TimeSeries z;  // gain-normalized linear output
  TimeSeries e;  // noise added before the nonlinearity
  TimeSeries y;  // y_t = f(z_t + e_t)
  double gain = 1.0;
};

WienerSimulation simulate_wiener(const LinearSystem& sys, const Nonlinearity& f, const TimeSeries& u,
                                 double sigma_e, std::uint64_t seed);

/// Rows of lagged inputs paired with outputs. Row j holds
/// (u_{d-1+j}, u_{d-2+j}, ..., u_j) and is paired with y_{d-1+j} (0-based).
struct RegressorDataset {
  Eigen::MatrixXd rows;
  Eigen::VectorXd outputs;
  std::vector<std::int64_t> time_index;

  std::size_t size() const noexcept { return static_cast<std::size_t>(rows.rows()); }
  std::size_t order() const noexcept { return static_cast<std::size_t>(rows.cols()); }
};

/// `burn_in` drops that many leading rows (filter transient).
RegressorDataset build_regressors(const TimeSeries& u, const TimeSeries& y, std::size_t d,
                                  std::size_t burn_in = 0);

/// Half-open range [begin, end) of sorted positions sharing one output value.
struct TieGroup {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const TieGroup&, const TieGroup&) = default;
};

struct SortedDataset {
  RegressorDataset base;
  std::vector<std::size_t> perm;  // perm[i] = original row at sorted position i
  std::vector<TieGroup> tie_groups;

  std::size_t size() const noexcept { return perm.size(); }
  double output(std::size_t sorted_pos) const { return base.outputs[static_cast<Eigen::Index>(perm[sorted_pos])]; }
  auto row(std::size_t sorted_pos) const { return base.rows.row(static_cast<Eigen::Index>(perm[sorted_pos])); }
};

/// Stable ascending sort on the outputs; ties are exact floating-point equality.
SortedDataset sort_by_output(RegressorDataset ds);

// Signal CSV: header `t,u,y[,z,e]`, decimal ASCII, LF endings.
struct SignalRecord {
  TimeSeries u;
  TimeSeries y;
  std::optional<TimeSeries> z;
  std::optional<TimeSeries> e;
};

void write_signal_csv(std::ostream& out, const SignalRecord& rec);
/// Columns are matched by header name; t must be consecutive integers.
SignalRecord read_signal_csv(std::istream& in);

}  // namespace minlip
