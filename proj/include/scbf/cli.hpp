#pragma once

// Scenario files, SVG output and the command-line front end.

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "scbf/experiments.hpp"

namespace scbf {

/// Bad scenario file, flag value or violated invariant. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses a YAML scenario. Missing keys keep their defaults; unknown keys and
/// malformed values are rejected with the section and key in the message.
Scenario parse_scenario_text(const std::string& text);

/// Reads a scenario file. The name "default" yields the built-in scenario.
Scenario parse_scenario(const std::string& path);

/// Every field, in a form parse_scenario_text reads back to an equal Scenario.
std::string serialize_scenario(const Scenario& scenario);

/// Top-down X-Y view: reference circle, robot path, obstacle paths and the
/// obstacle discs at five sampled times.
void write_svg(std::ostream& out, const Scenario& scenario, const TrajectoryLog& log);

/// Exit codes: 0 success, 2 usage or configuration error, 3 failed --assert.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace scbf
