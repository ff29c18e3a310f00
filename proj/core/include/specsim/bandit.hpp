#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "specsim/matching.hpp"
#include "specsim/model.hpp"
#include "specsim/rng.hpp"
#include "specsim/slot_engine.hpp"

namespace specsim {

struct BanditConfig {
  int alpha = 8;        // exploration slots per epoch
  int beta = 2;         // chunk size; must divide alpha
  double lambda = 1.0;  // switching-cost weight in the regret
  long long max_slots = 1;
};

void validate(const BanditConfig& config);

struct ArmEstimate {
  double sum = 0.0;
  long long count = 0;

  void add(double value) {
    sum += value;
    ++count;
  }
  bool observed() const { return count > 0; }
  double mean() const { return sum / static_cast<double>(count); }
  // Optimistic view: unobserved arms look infinitely good so the first
  // exploration epochs cover them.
  double optimistic_mean() const {
    return observed() ? mean() : std::numeric_limits<double>::infinity();
  }
};

struct BanditState {
  int epoch = 1;
  std::vector<std::vector<ArmEstimate>> estimates;  // [request][ssm]
  std::vector<int> assignment;                      // request -> ssm or -1
  std::vector<int> prewarmed;                       // request -> ssm or -1

  static BanditState make(int num_requests, int num_ssms);
};

// Eq.-style regret accumulators. goodput_regret is the pseudo-regret built
// from ground-truth arm means (monotone by optimality of the fixed best
// assignment); switching_cost accumulates realized recomputation seconds.
struct RegretLedger {
  double goodput_regret = 0.0;
  double switching_cost = 0.0;
  double lambda = 1.0;

  double total() const { return goodput_regret + lambda * switching_cost; }
};

struct RegretPoint {
  long long slot = 0;  // slots completed when the point was taken
  int epoch = 0;
  double goodput_regret = 0.0;
  double switching_cost = 0.0;
  double total = 0.0;
};

// Phase of slot t under the epoch schedule: epoch k spends alpha slots
// exploring, then 2^k exploiting.
struct EpochPhase {
  int epoch = 1;
  bool explore = true;
};
EpochPhase phase_of_slot(const BanditConfig& config, long long t);

// Exploitation stage length for epoch k: 2^k, capped by the remaining
// horizon.
long long exploitation_duration(int epoch, long long remaining_slots);

// Resolves per-request SSM wishes against batch capacities: overloaded
// models keep a uniformly random subset of their claimants, the dropped
// ones are re-drawn uniformly among models with residual capacity, and a
// request idles (-1) only when nothing has room.
std::vector<int> resolve_capacity_overflow(const std::vector<int>& desired,
                                           const std::vector<int>& admitted,
                                           const std::vector<SsmProfile>& ssms,
                                           Rng& rng);

// One random exploration draw (one chunk's assignment).
std::vector<int> draw_exploration_assignment(const std::vector<int>& admitted,
                                             const std::vector<SsmProfile>& ssms,
                                             int num_requests, Rng& rng);

// Highest-estimated-goodput destination per admitted request (ties to the
// lowest ssm id); used to prewarm KV caches ahead of exploitation.
std::vector<int> prewarm_destination(const BanditState& state,
                                     const std::vector<int>& admitted);

// Per-slot observer: slot stats plus the index of the first history row
// the slot appended.
using SlotHook = std::function<void(const SlotStats&, std::size_t)>;

// Runs the chunk-based exploration stage of the current epoch: alpha slots
// in chunks of beta, estimates updated with every observed slot goodput.
// `budget` caps the number of slots (horizon truncation). Returns the
// number of slots executed.
long long run_exploration_epoch(BanditState& state, const BanditConfig& config,
                                SlotEngine& engine, Rng& rng, long long budget,
                                std::vector<SlotRecord>* history,
                                const SlotHook& hook = {});

// Maximum-weight matching on the current estimates (cold-start infinities
// clamped to the largest finite estimate plus one).
std::vector<int> plan_exploitation(const BanditState& state,
                                   const std::vector<int>& admitted,
                                   const std::vector<SsmProfile>& ssms);

// Full learning loop result; also reused by the baseline policies.
struct PolicyRunResult {
  std::vector<SlotRecord> history;
  std::vector<double> slot_durations;
  double accepted_tokens = 0.0;
  double total_time_sec = 0.0;
  long long padding_tokens = 0;
  double verify_time_sec = 0.0;
  RegretLedger ledger;
  std::vector<RegretPoint> regret_curve;  // per-epoch, LBSS only
  std::vector<int> final_assignment;
  BanditState state;
  std::vector<Request> requests;  // post-run states

  double goodput() const {
    return total_time_sec > 0.0 ? accepted_tokens / total_time_sec : 0.0;
  }
};

struct LbssOptions {
  EngineOptions engine;
  // Ground-truth expected goodputs (simulator-only); enables the ledger
  // and the per-epoch regret curve.
  const std::vector<std::vector<double>>* ground_truth = nullptr;
};

PolicyRunResult run_lbss(const BanditConfig& config, const WorkloadSpec& spec,
                         const LbssOptions& options = {});

// Realized cumulative regret recomputed from raw history:
// sum_i (T g_{i,x*} - sum_t r_i(t)) + lambda * sum z.
struct RegretBreakdown {
  double goodput_term = 0.0;
  double switching_term = 0.0;
  double total = 0.0;
  std::vector<int> optimal_assignment;
};
RegretBreakdown cumulative_regret(
    const std::vector<std::vector<double>>& ground_truth,
    const std::vector<int>& capacities, const std::vector<SlotRecord>& history,
    double lambda, long long total_slots);

}  // namespace specsim
