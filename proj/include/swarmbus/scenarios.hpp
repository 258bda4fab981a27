#pragma once

#include <string>
#include <vector>

namespace swarmbus::healthfuse {

/// Canned end-to-end walks through the demo deployment. Reports are
/// line-oriented and stable so scripts (and the acceptance suite) can
/// grep them.
struct ScenarioResult {
    std::string name;
    bool ok = true;
    std::string report;
};

std::vector<std::string> scenario_names();
ScenarioResult run_scenario(const std::string& name);

} // namespace swarmbus::healthfuse
