#pragma once

#include <json.hpp>
#include <string>

#include "nestgam/model.hpp"
#include "nestgam/oracle.hpp"

namespace nestgam {

/// Parses a model config. Unknown keys and type errors raise ErrorCode::Config with the JSON path.
ModelSpec parse_model_config(const nlohmann::json& j);
ModelSpec load_model_config(const std::string& path);
nlohmann::json model_spec_to_json(const ModelSpec& spec);

/// Simulation scenario config (`kind`, `n`, `noise`, `dims`, `omega`, `omega2`, `bandwidth`).
SimScenario parse_scenario_config(const nlohmann::json& j);
nlohmann::json scenario_to_json(const SimScenario& sc);

/// Parses JSON text, mapping syntax errors to ErrorCode::Config.
nlohmann::json parse_json_text(const std::string& text, const std::string& what);

}  // namespace nestgam
