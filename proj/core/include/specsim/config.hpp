#pragma once

#include <string>

#include "specsim/experiment.hpp"

namespace specsim {

// Experiment configs are flat structured-text files (a TOML subset:
// [table] and [[table array]] headers, key = value lines, strings,
// numbers, booleans, and single-line possibly nested arrays). Unknown keys
// are rejected so typos fail loudly.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Inverse of parse_config; parse_config(config_toml(c)) == c.
std::string config_toml(const ExperimentConfig& config);

}  // namespace specsim
