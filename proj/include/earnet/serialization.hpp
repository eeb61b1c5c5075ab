#pragma once

// JSON forms of simulator configs, scenarios and ground truth. Parse errors
// throw InvalidConfig naming the source, line and field.

#include <string>
#include <string_view>

#include "earnet/simulator.hpp"

namespace earnet {

inline constexpr std::string_view kScenarioSchema = "earnet.scenario/1";
inline constexpr std::string_view kGroundTruthSchema = "earnet.ground_truth/1";

SimulationConfig parse_simulation_config(std::string_view text, std::string_view source = "config");
std::string simulation_config_to_json(const SimulationConfig& config);

std::string scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(std::string_view text, std::string_view source = "scenario");

std::string ground_truth_to_json(const Scenario& scenario);

}  // namespace earnet
