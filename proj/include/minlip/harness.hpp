#pragma once

// Monte-Carlo benchmark sweeps: random pole-zero systems, Gaussian input,
// Wiener simulation, every requested estimator, correlation scoring and
// per-cell aggregation.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "minlip/estimator.hpp"

namespace minlip {

enum class Experiment { noiseless, quantized, noise_sweep, length_sweep };
enum class Method { minlip, minlip_noisy, ls_xy, ls_xz, bai2006 };

std::string_view to_string(Experiment e) noexcept;
std::string_view to_string(Method m) noexcept;

struct ExperimentConfig {
  Experiment experiment = Experiment::noiseless;
  std::vector<std::size_t> T_values;
  std::size_t d = 50;
  int m_p = 20;
  int m_z = 2;
  std::vector<double> sigma_e_values{0.0};
  double gamma = 10.0;
  int repetitions = 20;
  std::vector<Method> methods;
  std::uint64_t master_seed = 0;

  /// Requires exactly the config fields; throws ConfigError naming every
  /// missing, unknown or invalid one.
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  /// Throws ConfigError on violated invariants.
  void validate() const;
};

/// The nonlinearity each experiment simulates with.
Nonlinearity experiment_nonlinearity(Experiment e);

struct ResultRow {
  std::string experiment;
  std::string method;
  std::size_t T = 0;
  double sigma_e = 0.0;
  int repetition = 0;
  std::uint64_t seed = 0;
  double corr = 0.0;  // NaN when the method failed
  double abs_corr = 0.0;
  int shift = 0;
  double wall_time_ms = 0.0;
  std::string solver_status;
  std::size_t constraint_count = 0;  // MINLIP variants only
};

struct RunOptions {
  unsigned jobs = 0;       // 0: hardware concurrency
  std::size_t burn_in = 0;
  double bai_beta = 10.0;
  int bai_starts = 5;
  // Called once per finished row, serialized across workers.
  std::function<void(const ResultRow&)> on_row;
  // Called with every MINLIP estimate, serialized across workers.
  std::function<void(const ResultRow&, const WienerEstimate&)> on_estimate;
};

/// Child seed of one (repetition, T, sigma_e) cell.
std::uint64_t cell_seed(std::uint64_t master_seed, int repetition, std::size_t T, double sigma_e);

/// All methods on one simulated dataset; rows in config method order.
std::vector<ResultRow> run_repetition(const ExperimentConfig& cfg, std::size_t T, double sigma_e, int repetition,
                                      const RunOptions& opts = {});

/// Rows ordered by T, sigma_e, method (config order) and repetition.
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

struct SummaryRow {
  std::string experiment;
  std::string method;
  std::size_t T = 0;
  double sigma_e = 0.0;
  std::size_t count = 0;     // rows with a finite corr
  std::size_t failures = 0;  // rows without
  double corr_median = 0.0, corr_q25 = 0.0, corr_q75 = 0.0, corr_mean = 0.0;
  double abs_corr_median = 0.0, abs_corr_q25 = 0.0, abs_corr_q75 = 0.0, abs_corr_mean = 0.0;
};

/// One row per (experiment, method, T, sigma_e) cell in first-appearance
/// order. Quartiles interpolate linearly between order statistics.
std::vector<SummaryRow> aggregate(const std::vector<ResultRow>& rows);

double percentile(std::vector<double> values, double p);

/// wall_time_ms is written only when `timing` is set, so that results files
/// are reproducible byte for byte.
void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows, bool timing = false);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

}  // namespace minlip
