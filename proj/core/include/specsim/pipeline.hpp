#pragma once

#include <cstdint>
#include <vector>

#include "specsim/model.hpp"

namespace specsim {

inline constexpr int kLlmResource = -1;

enum class EventKind { SpecStart, SpecEnd, VerifyStart, VerifyEnd };

struct Event {
  double time_sec = 0.0;
  EventKind kind = EventKind::SpecStart;
  int resource = 0;  // ssm id, or kLlmResource for the verifier
  int micro_batch = 0;
  long long slot = 0;
};

struct EventTrace {
  std::vector<Event> events;
  double llm_busy_sec = 0.0;
  double llm_idle_sec = 0.0;
  long long accepted_tokens = 0;

  double makespan() const { return llm_busy_sec + llm_idle_sec; }
  bool empty() const { return events.empty(); }
};

// Per-SSM micro-batch counts. Request lists are split near-equally in id
// order, remainder going to the earlier micro-batches.
struct MicroBatchPlan {
  std::vector<int> per_ssm;

  bool all_ones() const {
    for (int b : per_ssm) {
      if (b != 1) return false;
    }
    return true;
  }
};

MicroBatchPlan uniform_plan(const std::vector<int>& batch_sizes, int b);

struct PipelineOptions {
  bool packing = false;
  int pack_width = 0;
  long long base_slot = 0;  // offset for the per-(slot, request) outcome draws
};

// A fixed serving scenario: every request is pre-assigned to one
// speculative model (-1 = never served). Requests beyond a model's
// capacity wait in that model's queue and take over slots as earlier
// requests finish, which keeps replacement order independent of event
// timing.
struct PipelineScenario {
  std::vector<Request> requests;
  std::vector<SsmProfile> ssm_profiles;
  LlmProfile llm;
  int window = 1;
  bool bonus_token = true;
  std::uint64_t seed = 0;
  std::vector<int> assignment;  // request id -> ssm id or -1
  PipelineOptions options;
};

// Lock-step schedule: per slot all models speculate in parallel, then one
// verification pass covers the combined batch, starting when the slowest
// model finishes.
EventTrace simulate_serial(const PipelineScenario& scenario, long long slots);

// Micro-batched schedule: each model emits its micro-batches sequentially,
// the verifier serves them FIFO one at a time, and a micro-batch's next
// slot begins as soon as its own verification ends. A plan with no
// splitting degenerates to the serial schedule.
EventTrace simulate_pipelined(const PipelineScenario& scenario,
                              const MicroBatchPlan& plan, long long slots);

struct ThroughputStats {
  double tokens_per_sec = 0.0;
  double idle_fraction = 0.0;
};

// Accepted tokens per second of makespan plus the verifier idle share.
ThroughputStats throughput(const EventTrace& trace);

struct TuneConfig {
  int initial_micro_batches = 2;
  double degradation_threshold = 0.05;  // relative drop that stops the search
  long long probe_slots = 20;
  int max_micro_batches = 8;
};

// Splitting heuristic: probes uniform plans with growing micro-batch
// counts (b = 1 anchors the unsplit baseline) using short pipelined
// simulations, stops at the first clear throughput drop, and returns the
// last non-degraded plan.
MicroBatchPlan tune_micro_batches(const PipelineScenario& scenario,
                                  const TuneConfig& config = {},
                                  std::vector<double>* probe_curve = nullptr);

}  // namespace specsim
