#pragma once

#include <cstdint>
#include <vector>

#include "specsim/model.hpp"

namespace specsim {

// One per-request row of the run history.
struct SlotRecord {
  long long slot = 0;
  int request_id = 0;
  int ssm_id = -1;  // -1: admitted but idle this slot
  bool explore = false;
  int proposed = 0;
  int accepted = 0;
  int bonus = 0;
  double wall_time_sec = 0.0;
  bool switched = false;
  double switch_cost_sec = 0.0;
};

// KV recomputation cost paid when a request moves between speculative
// models: (prompt + generated) / destination speed, waived entirely when
// the destination's KV cache was prewarmed.
double switching_cost(const Request& request, int from_ssm, int to_ssm,
                      int prewarmed_ssm, const std::vector<SsmProfile>& ssms);

struct EngineOptions {
  bool packing = false;
  int pack_width = 0;  // 0: use the verification batch size
  long long base_slot = 0;
};

struct SlotStats {
  double duration_sec = 0.0;
  double spec_max_sec = 0.0;
  double verify_sec = 0.0;
  long long verify_tokens = 0;
  long long padding_tokens = 0;
  int served = 0;
  std::vector<SpeculationOutcome> outcomes;
};

// Executes time slots over a fixed cluster: every speculative model runs
// its batch in parallel, then one verification pass covers the combined
// batch. Admission is capacity-bound; finished requests leave at the slot
// boundary and waiting ones are admitted in id order.
class SlotEngine {
 public:
  SlotEngine(const WorkloadSpec& spec, std::vector<Request> requests,
             EngineOptions options = {});

  // Runs one slot under the given assignment (request id -> ssm id, or -1
  // to idle). Throws CapacityError if a batch exceeds its model's capacity.
  // `prewarm` maps request id -> prewarmed destination (-1 for none).
  SlotStats run_slot(const std::vector<int>& assignment,
                     const std::vector<int>& prewarm, bool explore,
                     std::vector<SlotRecord>* history);

  // Drops finished requests from the admitted set and admits waiting ones.
  // Returns (vacated request, replacement request or -1) pairs so callers
  // can transfer assignment slots.
  std::vector<std::pair<int, int>> refill_admitted();

  const std::vector<Request>& requests() const { return requests_; }
  const std::vector<int>& admitted() const { return admitted_; }
  const WorkloadSpec& spec() const { return spec_; }
  long long next_slot() const { return next_slot_; }
  int last_ssm(int request_id) const { return last_ssm_[request_id]; }
  bool all_finished() const;

  // Totals over all slots run so far.
  double total_time_sec = 0.0;
  double total_accepted = 0.0;
  long long total_padding = 0;
  double total_verify_sec = 0.0;

 private:
  WorkloadSpec spec_;
  std::vector<Request> requests_;
  EngineOptions options_;
  std::vector<int> admitted_;   // sorted by id
  std::vector<int> last_ssm_;   // last model each request ran on, -1 if none
  long long next_slot_ = 0;
  int next_waiting_ = 0;
};

// Token count (padding included) charged to one verification pass, plus
// the padding share. With packing enabled the count is the packed KV
// tensor plus replicated query rows; otherwise rows are aligned to the
// longest request.
struct VerifyBatchCost {
  long long tokens = 0;
  long long padding = 0;
};
VerifyBatchCost verify_batch_cost(const std::vector<int>& kv_lens, int window,
                                  bool packing, int pack_width);

}  // namespace specsim
