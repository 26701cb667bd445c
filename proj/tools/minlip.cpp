#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "minlip/analysis.hpp"
#include "minlip/baselines.hpp"
#include "minlip/error.hpp"
#include "minlip/estimator.hpp"
#include "minlip/harness.hpp"
#include "minlip/random.hpp"
#include "minlip/serialize.hpp"
#include "minlip/signals.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

enum Exit { ok = 0, domain_error = 1, usage_error = 2, infeasible = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void setup_logging() {
  auto log = spdlog::stderr_color_mt("minlip");
  log->set_pattern("[%l] %v");
  log->set_level(spdlog::level::err);
  if (const char* env = std::getenv("MINLIP_LOG")) {
    const std::string v = env;
    if (v == "error")
      log->set_level(spdlog::level::err);
    else if (v == "info")
      log->set_level(spdlog::level::info);
    else if (v == "debug")
      log->set_level(spdlog::level::debug);
    else
      log->warn("ignoring MINLIP_LOG={} (expected error, info or debug)", v);
  }
  spdlog::set_default_logger(log);
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw minlip::Error("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw minlip::Error("cannot write " + path);
  return out;
}

std::string truth_path(const std::string& signal_path) { return signal_path + ".truth.json"; }

// ---- simulate ----

struct SimulateArgs {
  int np = 20, nz = 2;
  std::size_t d = 50, T = 600;
  double sigma_e = 0.0;
  std::string nonlinearity = "tanh";
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
  const auto f = minlip::Nonlinearity::from_name(a.nonlinearity);
  const auto sys = minlip::random_pole_zero(a.np, a.nz, minlip::stream_seed(a.seed, minlip::Stream::system));
  const auto u = minlip::gaussian_input(a.T, minlip::stream_seed(a.seed, minlip::Stream::input));
  const auto sim = minlip::simulate_wiener(sys, f, u, a.sigma_e, minlip::stream_seed(a.seed, minlip::Stream::noise));
  const Eigen::VectorXd taps = minlip::impulse_response(sys, a.d).taps() * sim.gain;

  auto out = open_out(a.out);
  minlip::write_signal_csv(out, {u, sim.y, sim.z, sim.e});
  json truth = {{"impulse_response", std::vector<double>(taps.data(), taps.data() + taps.size())},
                {"d", a.d},
                {"np", a.np},
                {"nz", a.nz},
                {"T", a.T},
                {"sigma_e", a.sigma_e},
                {"nonlinearity", f.name()},
                {"gain", sim.gain},
                {"seed", a.seed},
                {"input", "gaussian_white"}};
  open_out(truth_path(a.out)) << truth.dump(2) << "\n";
  spdlog::info("wrote {} samples to {}", a.T, a.out);
  return ok;
}

// ---- identify ----

struct IdentifyArgs {
  std::string in;
  std::size_t d = 50;
  std::string method = "minlip";
  std::optional<double> gamma;
  std::size_t burn_in = 0;
  std::string out;
  std::string dump_qp;
  double beta = 10.0;
  int starts = 5;
  std::uint64_t seed = 0;
};

void dump_qp(const IdentifyArgs& a, const minlip::RegressorDataset& ds) {
  const auto sd = minlip::sort_by_output(ds);
  const auto cs = minlip::build_tie_constraints(sd);
  auto out = open_out(a.dump_qp);
  minlip::write_qp_dump(out, a.gamma ? minlip::minlip_noisy_qp(sd, cs, *a.gamma) : minlip::minlip_qp(sd, cs));
}

int cmd_identify(IdentifyArgs a) {
  auto in = open_in(a.in);
  const auto rec = minlip::read_signal_csv(in);
  const auto ds = minlip::build_regressors(rec.u, rec.y, a.d, a.burn_in);

  if (a.method == "minlip_noisy" && !a.gamma) a.gamma = 10.0;
  json doc;
  if (a.method == "minlip" || a.method == "minlip_noisy") {
    if (!a.dump_qp.empty()) dump_qp(a, ds);
    const auto est = a.gamma ? minlip::minlip_identify_noisy(ds, *a.gamma) : minlip::minlip_identify(ds);
    spdlog::info("solver {} after {} iterations, {} constraints", minlip::to_string(est.solver.status),
                 est.solver.iterations, est.solver.constraint_count);
    doc = minlip::to_json(est);
  } else if (a.method == "ls_xy") {
    doc = minlip::to_json(minlip::ls_fir(ds));
  } else if (a.method == "ls_xz") {
    if (!rec.z) throw minlip::Error("ls_xz needs a z column in the input");
    doc = minlip::to_json(minlip::ls_oracle(rec.u, *rec.z, a.d, a.burn_in));
  } else {
    doc = minlip::to_json(minlip::bai2006(ds, a.beta, a.starts, a.seed));
  }

  if (fs::exists(truth_path(a.in))) {
    auto tin = open_in(truth_path(a.in));
    const json truth = json::parse(tin);
    const auto h0 = truth.at("impulse_response").get<std::vector<double>>();
    const auto est = doc.at("a").get<std::vector<double>>();
    const auto c = minlip::system_correlation(
        minlip::FirSystem(Eigen::Map<const Eigen::VectorXd>(h0.data(), static_cast<Eigen::Index>(h0.size()))),
        minlip::FirSystem(Eigen::Map<const Eigen::VectorXd>(est.data(), static_cast<Eigen::Index>(est.size()))));
    doc["corr"] = {{"corr", c.corr}, {"abs_corr", std::abs(c.corr)}, {"shift", c.shift}};
  }

  const std::string text = doc.dump(2) + "\n";
  if (a.out.empty() || a.out == "-")
    std::cout << text;
  else
    open_out(a.out) << text;
  return ok;
}

// ---- benchmark ----

struct BenchmarkArgs {
  std::string config;
  std::string out_dir;
  unsigned jobs = 0;
  bool timing = false;
  std::size_t burn_in = 0;
};

int cmd_benchmark(const BenchmarkArgs& a) {
  json j;
  {
    auto in = open_in(a.config);
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw UsageError(fmt::format("config {} is not valid JSON: {}", a.config, e.what()));
    }
  }
  const auto cfg = minlip::ExperimentConfig::from_json(j);

  minlip::RunOptions opts;
  opts.jobs = a.jobs;
  opts.burn_in = a.burn_in;
  opts.on_row = [](const minlip::ResultRow& r) {
    spdlog::debug("{} T={} sigma_e={} rep={} corr={} status={} ({:.0f} ms)", r.method, r.T, r.sigma_e, r.repetition,
                  r.corr, r.solver_status, r.wall_time_ms);
  };
  const auto rows = minlip::run_experiment(cfg, opts);
  const auto summary = minlip::aggregate(rows);

  fs::create_directories(a.out_dir);
  {
    auto out = open_out((fs::path(a.out_dir) / "results.csv").string());
    minlip::write_results_csv(out, rows, a.timing);
  }
  {
    auto out = open_out((fs::path(a.out_dir) / "summary.csv").string());
    minlip::write_summary_csv(out, summary);
  }
  minlip::write_summary_csv(std::cout, summary);
  return ok;
}

// ---- check-pe ----

struct CheckPeArgs {
  std::string in;
  std::size_t d = 50;
  double epsilon = 1.0;
  std::size_t burn_in = 0;
  std::string out;
};

int cmd_check_pe(const CheckPeArgs& a) {
  auto in = open_in(a.in);
  const auto rec = minlip::read_signal_csv(in);
  const auto ds = minlip::build_regressors(rec.u, rec.y, a.d, a.burn_in);
  const auto rep = minlip::local_pe_check(ds, a.epsilon);
  if (!a.out.empty()) open_out(a.out) << minlip::to_json(rep).dump(2) << "\n";
  std::cout << fmt::format("satisfied: {}\nfailures: {} of {} rows\n", rep.satisfied ? "yes" : "no",
                           rep.witness_failures.size(), ds.size());
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Monotone Wiener system identification by Lipschitz-constant minimization"};
  app.require_subcommand(1);
  const std::vector<std::string> methods{"minlip", "minlip_noisy", "ls_xy", "ls_xz", "bai2006"};

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Simulate a random monotone Wiener system and write a signal CSV");
  s->add_option("--np", sim.np, "Number of conjugate pole pairs")->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--nz", sim.nz, "Number of conjugate zero pairs")->capture_default_str()->check(CLI::NonNegativeNumber);
  s->add_option("--d", sim.d, "Length of the true impulse response in the sidecar")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  s->add_option("--T", sim.T, "Number of samples")->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--sigma-e", sim.sigma_e, "Std of the noise added before the nonlinearity")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  s->add_option("--nonlinearity", sim.nonlinearity, "tanh, quantizer or identity")->capture_default_str();
  s->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  s->add_option("--out", sim.out, "Output CSV (t,u,y,z,e); the true impulse response goes to <out>.truth.json")
      ->required();

  IdentifyArgs id;
  auto* i = app.add_subcommand("identify", "Estimate the FIR taps from a signal CSV and write JSON");
  i->add_option("--in", id.in, "Signal CSV with t, u and y columns")->required();
  i->add_option("--d", id.d, "FIR order")->capture_default_str()->check(CLI::PositiveNumber);
  i->add_option("--method", id.method, "minlip, minlip_noisy, ls_xy, ls_xz or bai2006")
      ->capture_default_str()
      ->check(CLI::IsMember(methods));
  i->add_option("--gamma", id.gamma, "Residual penalty; selects the noisy MINLIP variant (default 10 for minlip_noisy)")
      ->check(CLI::PositiveNumber);
  i->add_option("--burn-in", id.burn_in, "Regressor rows to drop at the start")->capture_default_str();
  i->add_option("--out", id.out, "Output JSON (default: standard output)");
  i->add_option("--dump-qp", id.dump_qp, "Write the MINLIP quadratic program in plain-text matrix form");
  i->add_option("--beta", id.beta, "bai2006 smoothing slope")->capture_default_str()->check(CLI::PositiveNumber);
  i->add_option("--starts", id.starts, "bai2006 random starts")->capture_default_str()->check(CLI::PositiveNumber);
  i->add_option("--seed", id.seed, "bai2006 seed")->capture_default_str();

  BenchmarkArgs bm;
  auto* b = app.add_subcommand("benchmark", "Run a Monte-Carlo sweep from a JSON config");
  b->add_option("--config", bm.config, "Experiment config JSON")->required();
  b->add_option("--out-dir", bm.out_dir, "Directory for results.csv and summary.csv")->required();
  b->add_option("--jobs", bm.jobs, "Concurrent repetitions (default: available cores)");
  b->add_flag("--timing", bm.timing, "Record wall_time_ms (makes results.csv non-reproducible)");
  b->add_option("--burn-in", bm.burn_in, "Regressor rows to drop at the start")->capture_default_str();

  CheckPeArgs pe;
  auto* c = app.add_subcommand("check-pe", "Check epsilon-local persistency of excitation of a signal CSV");
  c->add_option("--in", pe.in, "Signal CSV")->required();
  c->add_option("--d", pe.d, "Regressor order")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--epsilon", pe.epsilon, "Neighbourhood radius")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--burn-in", pe.burn_in, "Regressor rows to drop at the start")->capture_default_str();
  c->add_option("--out", pe.out, "Write the full report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return usage_error;
  }

  try {
    if (*s) return cmd_simulate(sim);
    if (*i) return cmd_identify(id);
    if (*b) return cmd_benchmark(bm);
    if (*c) return cmd_check_pe(pe);
  } catch (const minlip::ConfigError& e) {
    std::string fields;
    for (const auto& f : e.fields()) fields += (fields.empty() ? "" : ", ") + f;
    spdlog::error("{}", e.what());
    std::cerr << "offending fields: " << fields << "\n";
    return usage_error;
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return usage_error;
  } catch (const minlip::InfeasibleError& e) {
    spdlog::error("{}", e.what());
    std::cerr << "hint: the ordering constraints cannot all hold; rerun with --gamma <value> (e.g. --gamma 10)\n";
    return infeasible;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return domain_error;
  }
  return usage_error;
}
