#pragma once

#include "ripple/scenario.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace ripple {

/// Schema-checks a parsed document. Errors are InvalidScenario carrying the
/// JSON path of the offending value.
Scenario parse_scenario(const nlohmann::json& doc);

/// Reads and parses a scenario file; syntax errors report line and column.
Scenario load_scenario(const std::filesystem::path& path);

Scenario parse_scenario_text(const std::string& text);

nlohmann::json to_json(const Scenario& s);

} // namespace ripple
