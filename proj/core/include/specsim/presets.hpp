#pragma once

#include <string>
#include <vector>

#include "specsim/experiment.hpp"

namespace specsim {
namespace presets {

// Built-in synthetic scenarios. The five-model cluster is shaped like a
// small-to-large draft family (fast/low-acceptance through slow/
// high-acceptance); the numbers are synthetic and exist to reproduce
// qualitative trade-offs at desk scale, not any real hardware.
//
//   hetero - stationary five-model cluster, capacities sum to the request
//            count; used for the regret and policy-comparison studies.
//   mix    - blended difficulty mix with padding-sensitive verification
//            and micro-batch pipelining headroom; used for ablations.
//   fig9   - batch skew toward the slow models, strong batch slowdown;
//            used for the micro-batch sweep.
ExperimentConfig hetero();
ExperimentConfig mix();
ExperimentConfig fig9();

ExperimentConfig by_name(const std::string& name);
std::vector<std::string> names();

}  // namespace presets
}  // namespace specsim
