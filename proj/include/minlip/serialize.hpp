#pragma once

// JSON views of estimates and diagnostic reports.

#include <json.hpp>

#include "minlip/analysis.hpp"
#include "minlip/baselines.hpp"
#include "minlip/estimator.hpp"

namespace minlip {

/// {method, a, L, gamma, f_hat: [[x, y], ...], residuals_e?, solver: {...}}
nlohmann::json to_json(const WienerEstimate& est);
/// Same shape as a WienerEstimate with gamma null and method diagnostics.
nlohmann::json to_json(const BaselineEstimate& est);
nlohmann::json to_json(const PeReport& rep);
nlohmann::json to_json(const LipschitzProfile& prof);

}  // namespace minlip
