#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "leris/scenario.hpp"

namespace leris
{

class ScenarioFileError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

// Sectioned `key = value` text:
//
//   [leds]
//   ceiling_led_1 = [3.5, 5.0, 3.0]
//   [photodetector]
//   psi_max_deg = 75
//
// Keys absent from the text keep their default values. Unknown sections or
// keys are errors.
Scenario parse_scenario(std::string_view text, const std::string& origin = "<scenario>");

Scenario load_scenario_file(const std::filesystem::path& path);

// Canonical text form; parsing it back reproduces the scenario up to the
// rounding of degree/radian conversions.
std::string format_scenario(const Scenario& scenario);

// FNV-1a of the canonical text form.
std::uint64_t scenario_hash(const Scenario& scenario);

} // namespace leris
