#include "minlip/serialize.hpp"

#include <string>
#include <vector>

namespace minlip {

namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

nlohmann::json to_json(const WienerEstimate& est) {
  nlohmann::json j;
  j["method"] = est.gamma ? "minlip_noisy" : "minlip";
  j["a"] = to_vector(est.a);
  j["L"] = est.lipschitz_L;
  j["gamma"] = est.gamma ? nlohmann::json(*est.gamma) : nlohmann::json(nullptr);
  auto& f = j["f_hat"] = nlohmann::json::array();
  for (const auto& s : est.f_hat) f.push_back({s.x, s.y});
  if (est.residuals_e) j["residuals_e"] = to_vector(*est.residuals_e);
  j["solver"] = {
      {"status", std::string(to_string(est.solver.status))},
      {"iterations", est.solver.iterations},
      {"residuals",
       {{"primal", est.solver.primal_residual},
        {"dual", est.solver.dual_residual},
        {"complementarity", est.solver.complementarity}}},
      {"constraint_count", est.solver.constraint_count},
  };
  return j;
}

nlohmann::json to_json(const BaselineEstimate& est) {
  nlohmann::json j;
  j["method"] = std::string(to_string(est.method));
  j["a"] = to_vector(est.a);
  j["L"] = est.a.norm();
  j["gamma"] = nullptr;
  const auto& d = est.diagnostics;
  if (est.method == BaselineMethod::bai2006) {
    j["diagnostics"] = {{"iterations", d.iterations},
                        {"final_cost", d.final_cost},
                        {"initial_gradient_norm", d.initial_gradient_norm},
                        {"flat_objective", d.flat_objective},
                        {"best_start", d.best_start}};
  } else {
    j["diagnostics"] = {{"rank", d.rank}, {"rank_deficient", d.rank_deficient}};
  }
  return j;
}

nlohmann::json to_json(const PeReport& rep) {
  return {{"epsilon", rep.epsilon},
          {"order", rep.order},
          {"satisfied", rep.satisfied},
          {"witness_failures", rep.witness_failures},
          {"min_singular_values", rep.min_singular_values}};
}

nlohmann::json to_json(const LipschitzProfile& prof) {
  auto g = nlohmann::json::array();
  for (const auto& [dist, ratio] : prof.g_samples) g.push_back({dist, ratio});
  return {{"L0", prof.L0}, {"argmax_pair", {prof.argmax_pair.first, prof.argmax_pair.second}}, {"g_samples", g}};
}

}  // namespace minlip
