#include "minlip/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "minlip/analysis.hpp"
#include "minlip/baselines.hpp"
#include "minlip/error.hpp"
#include "minlip/random.hpp"

namespace minlip {

namespace {

constexpr std::pair<Experiment, std::string_view> kExperiments[] = {
    {Experiment::noiseless, "noiseless"},
    {Experiment::quantized, "quantized"},
    {Experiment::noise_sweep, "noise_sweep"},
    {Experiment::length_sweep, "length_sweep"},
};

constexpr std::pair<Method, std::string_view> kMethods[] = {
    {Method::minlip, "minlip"}, {Method::minlip_noisy, "minlip_noisy"}, {Method::ls_xy, "ls_xy"},
    {Method::ls_xz, "ls_xz"},   {Method::bai2006, "bai2006"},
};

constexpr std::string_view kFields[] = {"experiment", "T_values",    "d",       "m_p",     "m_z",
                                        "sigma_e_values", "gamma", "repetitions", "methods", "master_seed"};

template <class E, std::size_t N>
std::optional<E> parse_enum(const std::pair<E, std::string_view> (&table)[N], std::string_view name) {
  for (const auto& [v, s] : table)
    if (s == name) return v;
  return std::nullopt;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ", ") + s;
  return out;
}

// Collects every problem before throwing once.
struct Problems {
  std::vector<std::string> fields;
  std::vector<std::string> messages;

  void add(std::string field, std::string why) {
    if (std::find(fields.begin(), fields.end(), field) == fields.end()) fields.push_back(field);
    messages.push_back(field + ": " + why);
  }
  void raise_if_any() const {
    if (!fields.empty()) throw ConfigError("invalid experiment config (" + join(messages) + ")", fields);
  }
};

void check_invariants(const ExperimentConfig& c, Problems& bad) {
  if (c.d < 1) bad.add("d", "must be at least 1");
  if (c.T_values.empty()) bad.add("T_values", "must not be empty");
  for (auto T : c.T_values)
    if (T <= c.d) bad.add("T_values", fmt::format("T = {} must exceed d = {}", T, c.d));
  if (c.m_p < 1) bad.add("m_p", "must be at least 1");
  if (c.m_z < 0) bad.add("m_z", "must be nonnegative");
  if (c.sigma_e_values.empty()) bad.add("sigma_e_values", "must not be empty");
  for (double s : c.sigma_e_values)
    if (!(s >= 0.0) || !std::isfinite(s)) bad.add("sigma_e_values", "entries must be finite and nonnegative");
  if (!(c.gamma > 0.0) || !std::isfinite(c.gamma)) bad.add("gamma", "must be positive and finite");
  if (c.repetitions < 1) bad.add("repetitions", "must be at least 1");
  if (c.methods.empty()) bad.add("methods", "must not be empty");
  if (std::set<Method>(c.methods.begin(), c.methods.end()).size() != c.methods.size())
    bad.add("methods", "must not repeat a method");
}

bool is_count(const nlohmann::json& v) { return v.is_number_integer() && v.get<std::int64_t>() >= 0; }

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

std::string_view to_string(Experiment e) noexcept {
  for (const auto& [v, s] : kExperiments)
    if (v == e) return s;
  return "unknown";
}

std::string_view to_string(Method m) noexcept {
  for (const auto& [v, s] : kMethods)
    if (v == m) return s;
  return "unknown";
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  Problems bad;
  if (!j.is_object()) {
    bad.add("<document>", "expected a JSON object");
    bad.raise_if_any();
  }
  for (const auto& [key, _] : j.items())
    if (std::find(std::begin(kFields), std::end(kFields), key) == std::end(kFields)) bad.add(key, "unknown field");
  for (auto f : kFields)
    if (!j.contains(std::string(f))) bad.add(std::string(f), "missing");

  ExperimentConfig cfg;
  auto field = [&](std::string_view name) -> const nlohmann::json* {
    auto it = j.find(std::string(name));
    return it == j.end() ? nullptr : &*it;
  };

  if (auto v = field("experiment")) {
    auto e = v->is_string() ? parse_enum(kExperiments, v->get<std::string>()) : std::nullopt;
    if (e)
      cfg.experiment = *e;
    else
      bad.add("experiment", "expected one of noiseless, quantized, noise_sweep, length_sweep");
  }
  if (auto v = field("T_values")) {
    if (!v->is_array() || !std::all_of(v->begin(), v->end(), is_count))
      bad.add("T_values", "expected an array of nonnegative integers");
    else
      cfg.T_values = v->get<std::vector<std::size_t>>();
  }
  if (auto v = field("d")) {
    if (is_count(*v))
      cfg.d = v->get<std::size_t>();
    else
      bad.add("d", "expected a nonnegative integer");
  }
  for (auto [name, target] : {std::pair{"m_p", &cfg.m_p}, std::pair{"m_z", &cfg.m_z}, std::pair{"repetitions", &cfg.repetitions}}) {
    if (auto v = field(name)) {
      if (v->is_number_integer() && v->get<std::int64_t>() >= std::numeric_limits<int>::min() &&
          v->get<std::int64_t>() <= std::numeric_limits<int>::max())
        *target = v->get<int>();
      else
        bad.add(name, "expected an integer");
    }
  }
  if (auto v = field("sigma_e_values")) {
    if (!v->is_array() || !std::all_of(v->begin(), v->end(), [](const auto& x) { return x.is_number(); }))
      bad.add("sigma_e_values", "expected an array of numbers");
    else
      cfg.sigma_e_values = v->get<std::vector<double>>();
  }
  if (auto v = field("gamma")) {
    if (v->is_number())
      cfg.gamma = v->get<double>();
    else
      bad.add("gamma", "expected a number");
  }
  if (auto v = field("methods")) {
    cfg.methods.clear();
    bool ok = v->is_array();
    if (ok)
      for (const auto& m : *v) {
        auto e = m.is_string() ? parse_enum(kMethods, m.get<std::string>()) : std::nullopt;
        if (!e) {
          ok = false;
          break;
        }
        cfg.methods.push_back(*e);
      }
    if (!ok) bad.add("methods", "expected an array drawn from minlip, minlip_noisy, ls_xy, ls_xz, bai2006");
  }
  if (auto v = field("master_seed")) {
    if (v->is_number_unsigned() || is_count(*v))
      cfg.master_seed = v->get<std::uint64_t>();
    else
      bad.add("master_seed", "expected a nonnegative integer");
  }
  // Invariants only for fields that parsed; T_values depends on d.
  Problems semantic;
  check_invariants(cfg, semantic);
  auto flagged = [&](const std::string& f) { return std::find(bad.fields.begin(), bad.fields.end(), f) != bad.fields.end(); };
  const bool d_bad = flagged("d");
  for (const auto& m : semantic.messages) {
    const auto f = m.substr(0, m.find(": "));
    if (!flagged(f) && !(d_bad && f == "T_values")) bad.add(f, m.substr(f.size() + 2));
  }
  bad.raise_if_any();
  return cfg;
}

nlohmann::json ExperimentConfig::to_json() const {
  std::vector<std::string> names;
  for (auto m : methods) names.emplace_back(to_string(m));
  return {{"experiment", std::string(to_string(experiment))},
          {"T_values", T_values},
          {"d", d},
          {"m_p", m_p},
          {"m_z", m_z},
          {"sigma_e_values", sigma_e_values},
          {"gamma", gamma},
          {"repetitions", repetitions},
          {"methods", names},
          {"master_seed", master_seed}};
}

void ExperimentConfig::validate() const {
  Problems bad;
  check_invariants(*this, bad);
  bad.raise_if_any();
}

Nonlinearity experiment_nonlinearity(Experiment e) {
  return e == Experiment::quantized ? Nonlinearity::step_quantizer() : Nonlinearity::smooth_tanh();
}

std::uint64_t cell_seed(std::uint64_t master_seed, int repetition, std::size_t T, double sigma_e) {
  return derive_seed(master_seed, {static_cast<std::uint64_t>(repetition), static_cast<std::uint64_t>(T),
                                   std::bit_cast<std::uint64_t>(sigma_e)});
}

std::vector<ResultRow> run_repetition(const ExperimentConfig& cfg, std::size_t T, double sigma_e, int repetition,
                                      const RunOptions& opts) {
  const std::uint64_t seed = cell_seed(cfg.master_seed, repetition, T, sigma_e);
  std::vector<ResultRow> rows;
  for (auto m : cfg.methods) {
    ResultRow r;
    r.experiment = to_string(cfg.experiment);
    r.method = to_string(m);
    r.T = T;
    r.sigma_e = sigma_e;
    r.repetition = repetition;
    r.seed = seed;
    r.corr = r.abs_corr = nan();
    rows.push_back(std::move(r));
  }

  std::optional<FirSystem> h0;
  std::optional<TimeSeries> u;
  std::optional<WienerSimulation> sim;
  std::optional<RegressorDataset> ds;
  try {
    const PoleZeroSystem sys = random_pole_zero(cfg.m_p, cfg.m_z, stream_seed(seed, Stream::system));
    u = gaussian_input(T, stream_seed(seed, Stream::input));
    sim = simulate_wiener(sys, experiment_nonlinearity(cfg.experiment), *u, sigma_e, stream_seed(seed, Stream::noise));
    h0 = FirSystem(impulse_response(sys, cfg.d).taps() * sim->gain);
    ds = build_regressors(*u, sim->y, cfg.d, opts.burn_in);
  } catch (const std::exception& e) {
    for (auto& r : rows) r.solver_status = "error: " + std::string(e.what());
    return rows;
  }

  for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
    ResultRow& r = rows[k];
    const auto t0 = std::chrono::steady_clock::now();
    Eigen::VectorXd a;
    std::optional<WienerEstimate> est;
    try {
      switch (cfg.methods[k]) {
        case Method::minlip:
          try {
            est = minlip_identify(*ds);
            r.solver_status = to_string(est->solver.status);
          } catch (const InfeasibleError&) {
            est = minlip_identify_noisy(*ds, cfg.gamma);
            r.solver_status = "fallback_noisy";
          }
          break;
        case Method::minlip_noisy:
          est = minlip_identify_noisy(*ds, cfg.gamma);
          r.solver_status = to_string(est->solver.status);
          break;
        case Method::ls_xy: {
          const auto b = ls_fir(*ds);
          a = b.a;
          r.solver_status = b.diagnostics.rank_deficient ? "rank_deficient" : "ok";
          break;
        }
        case Method::ls_xz: {
          const auto b = ls_oracle(*u, sim->z, cfg.d, opts.burn_in);
          a = b.a;
          r.solver_status = b.diagnostics.rank_deficient ? "rank_deficient" : "ok";
          break;
        }
        case Method::bai2006: {
          const auto b = bai2006(*ds, opts.bai_beta, opts.bai_starts, stream_seed(seed, Stream::method));
          a = b.a;
          r.solver_status = b.diagnostics.flat_objective ? "flat_objective" : "ok";
          break;
        }
      }
      if (est) {
        a = est->a;
        r.constraint_count = est->solver.constraint_count;
      }
      if (a.allFinite() && a.norm() > 0.0) {
        const auto c = system_correlation(*h0, FirSystem(a));
        r.corr = c.corr;
        r.abs_corr = std::abs(c.corr);
        r.shift = c.shift;
      } else {
        r.solver_status = "degenerate_estimate";
      }
    } catch (const std::exception& e) {
      r.solver_status = "error: " + std::string(e.what());
    }
    r.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (est && opts.on_estimate) opts.on_estimate(r, *est);
  }
  return rows;
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  struct Task {
    std::size_t T;
    double sigma;
    int rep;
  };
  std::vector<Task> tasks;
  for (auto T : cfg.T_values)
    for (double s : cfg.sigma_e_values)
      for (int rep = 0; rep < cfg.repetitions; ++rep) tasks.push_back({T, s, rep});

  std::mutex mu;
  RunOptions local = opts;
  if (opts.on_row)
    local.on_row = [&](const ResultRow& r) {
      std::lock_guard lock(mu);
      opts.on_row(r);
    };
  if (opts.on_estimate)
    local.on_estimate = [&](const ResultRow& r, const WienerEstimate& e) {
      std::lock_guard lock(mu);
      opts.on_estimate(r, e);
    };

  std::vector<std::vector<ResultRow>> done(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < tasks.size();) {
      done[i] = run_repetition(cfg, tasks[i].T, tasks[i].sigma, tasks[i].rep, local);
      if (local.on_row)
        for (const auto& r : done[i]) local.on_row(r);
    }
  };
  unsigned jobs = opts.jobs ? opts.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, tasks.size()));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < jobs; ++k) pool.emplace_back(worker);
  }

  // Tasks are grouped by (T, sigma) with repetitions innermost; emit each
  // method's repetitions contiguously.
  std::vector<ResultRow> rows;
  rows.reserve(tasks.size() * cfg.methods.size());
  const auto reps = static_cast<std::size_t>(cfg.repetitions);
  for (std::size_t cell = 0; cell < tasks.size(); cell += reps)
    for (std::size_t m = 0; m < cfg.methods.size(); ++m)
      for (std::size_t rep = 0; rep < reps; ++rep) rows.push_back(done[cell + rep][m]);
  return rows;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw Error("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<SummaryRow> aggregate(const std::vector<ResultRow>& rows) {
  if (rows.empty()) throw Error("aggregate: no result rows");
  struct Cell {
    SummaryRow s;
    std::vector<double> corr, abs_corr;
  };
  std::vector<Cell> cells;
  for (const auto& r : rows) {
    auto it = std::find_if(cells.begin(), cells.end(), [&](const Cell& c) {
      return c.s.experiment == r.experiment && c.s.method == r.method && c.s.T == r.T && c.s.sigma_e == r.sigma_e;
    });
    if (it == cells.end()) {
      cells.push_back({});
      it = std::prev(cells.end());
      it->s.experiment = r.experiment;
      it->s.method = r.method;
      it->s.T = r.T;
      it->s.sigma_e = r.sigma_e;
    }
    if (std::isfinite(r.corr)) {
      it->corr.push_back(r.corr);
      it->abs_corr.push_back(r.abs_corr);
    } else {
      ++it->s.failures;
    }
  }

  auto mean = [](const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
  };
  std::vector<SummaryRow> out;
  for (auto& c : cells) {
    SummaryRow s = c.s;
    s.count = c.corr.size();
    if (s.count == 0) {
      s.corr_median = s.corr_q25 = s.corr_q75 = s.corr_mean = nan();
      s.abs_corr_median = s.abs_corr_q25 = s.abs_corr_q75 = s.abs_corr_mean = nan();
    } else {
      s.corr_median = percentile(c.corr, 0.5);
      s.corr_q25 = percentile(c.corr, 0.25);
      s.corr_q75 = percentile(c.corr, 0.75);
      s.corr_mean = mean(c.corr);
      s.abs_corr_median = percentile(c.abs_corr, 0.5);
      s.abs_corr_q25 = percentile(c.abs_corr, 0.25);
      s.abs_corr_q75 = percentile(c.abs_corr, 0.75);
      s.abs_corr_mean = mean(c.abs_corr);
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

std::string num(double v) { return std::isfinite(v) ? fmt::format("{}", v) : std::string(); }

// Statuses can carry exception text; keep them inside one CSV field.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c == '\n' ? ' ' : c;
  }
  return q + "\"";
}

}  // namespace

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows, bool timing) {
  out << "experiment,method,T,sigma_e,repetition,seed,corr,abs_corr,shift,wall_time_ms,solver_status\n";
  for (const auto& r : rows)
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.experiment, r.method, r.T, num(r.sigma_e),
                       r.repetition, r.seed, num(r.corr), num(r.abs_corr), r.shift,
                       timing ? fmt::format("{:.3f}", r.wall_time_ms) : std::string(), csv_field(r.solver_status));
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "experiment,method,T,sigma_e,count,failures,corr_median,corr_q25,corr_q75,corr_mean,"
         "abs_corr_median,abs_corr_q25,abs_corr_q75,abs_corr_mean\n";
  for (const auto& s : rows)
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", s.experiment, s.method, s.T, num(s.sigma_e),
                       s.count, s.failures, num(s.corr_median), num(s.corr_q25), num(s.corr_q75),
                       num(s.corr_mean), num(s.abs_corr_median), num(s.abs_corr_q25), num(s.abs_corr_q75),
                       num(s.abs_corr_mean));
}

}  // namespace minlip
