#pragma once

#include "specsim/bandit.hpp"
#include "specsim/model.hpp"

namespace specsim {

// Epsilon-greedy baseline: with probability epsilon every request picks the
// best model seen so far, otherwise all requests draw uniformly at random;
// either way capacity overflow is resolved by the same drop rule as
// exploration. Estimates are updated every slot. No prewarming.
PolicyRunResult run_epsilon_greedy(double epsilon, const WorkloadSpec& spec,
                                   long long max_slots,
                                   const EngineOptions& engine = {});

// Static prompt-length baseline: requests sorted by prompt length fill the
// models from fastest (smallest) to slowest (largest), i.e. the length
// thresholds are the capacity-sized quantiles of the admitted prompts.
PolicyRunResult run_greedy(const WorkloadSpec& spec, long long max_slots,
                           const EngineOptions& engine = {});

// Homogeneous baseline: every model instance behaves like `ssm_type`
// (speed, slowdown, and per-request acceptance all taken from that type)
// and requests are placed round-robin. Capacities keep the cluster shape.
PolicyRunResult run_vanilla(int ssm_type, const WorkloadSpec& spec,
                            long long max_slots,
                            const EngineOptions& engine = {});

// The workload transform behind run_vanilla, exposed for tests: same
// requests, same seeds, but all models act like ssm_type.
WorkloadSpec homogeneous_spec(const WorkloadSpec& spec, int ssm_type);
std::vector<Request> homogenize_requests(std::vector<Request> requests,
                                         int ssm_type);

}  // namespace specsim
