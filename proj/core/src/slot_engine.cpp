#include "specsim/slot_engine.hpp"

#include <algorithm>
#include <string>

#include "specsim/errors.hpp"
#include "specsim/packing.hpp"
#include "specsim/rng.hpp"

namespace specsim {

double switching_cost(const Request& request, int from_ssm, int to_ssm,
                      int prewarmed_ssm, const std::vector<SsmProfile>& ssms) {
  if (from_ssm == to_ssm || from_ssm < 0 || to_ssm < 0) return 0.0;
  if (static_cast<std::size_t>(to_ssm) >= ssms.size()) {
    throw InputError("switching_cost: unknown destination ssm");
  }
  if (prewarmed_ssm == to_ssm) return 0.0;  // KV already recomputed there
  const double tokens =
      static_cast<double>(request.prompt_len + request.generated_len);
  return tokens / ssms[to_ssm].tokens_per_sec;
}

VerifyBatchCost verify_batch_cost(const std::vector<int>& kv_lens, int window,
                                  bool packing, int pack_width) {
  VerifyBatchCost cost;
  if (kv_lens.empty()) return cost;
  const int n = static_cast<int>(kv_lens.size());
  if (packing) {
    const PackedLayout layout =
        pack(kv_lens, pack_width > 0 ? pack_width : n);
    cost.padding = layout.padding_tokens;
    cost.tokens = layout.total_cells();
    for (int replicas : layout.q_replica_rows) {
      cost.tokens += static_cast<long long>(replicas) * window;
    }
  } else {
    cost.padding = naive_padding(kv_lens);
    long long kv_total = 0;
    for (int len : kv_lens) kv_total += len;
    cost.tokens = kv_total + cost.padding +
                  static_cast<long long>(n) * window;  // one query row block each
  }
  return cost;
}

SlotEngine::SlotEngine(const WorkloadSpec& spec, std::vector<Request> requests,
                       EngineOptions options)
    : spec_(spec), requests_(std::move(requests)), options_(options) {
  last_ssm_.assign(requests_.size(), -1);
  const int capacity = spec_.total_capacity();
  for (std::size_t i = 0; i < requests_.size(); ++i) {
    if (static_cast<int>(admitted_.size()) < capacity &&
        requests_[i].state != RequestState::Finished) {
      requests_[i].state = RequestState::Active;
      admitted_.push_back(static_cast<int>(i));
    }
    next_waiting_ = static_cast<int>(i) + 1;
    if (static_cast<int>(admitted_.size()) == capacity) break;
  }
}

bool SlotEngine::all_finished() const {
  for (const Request& r : requests_) {
    if (r.state != RequestState::Finished) return false;
  }
  return true;
}

SlotStats SlotEngine::run_slot(const std::vector<int>& assignment,
                               const std::vector<int>& prewarm, bool explore,
                               std::vector<SlotRecord>* history) {
  const int num_ssms = static_cast<int>(spec_.ssm_profiles.size());
  std::vector<int> batch_size(num_ssms, 0);
  for (int id : admitted_) {
    const int j = assignment[id];
    if (j < 0) continue;
    if (j >= num_ssms) {
      throw InputError("run_slot: unknown ssm in assignment");
    }
    ++batch_size[j];
  }
  for (int j = 0; j < num_ssms; ++j) {
    if (batch_size[j] > spec_.ssm_profiles[j].batch_capacity) {
      throw CapacityError("run_slot: ssm " + std::to_string(j) +
                          " batch exceeds capacity");
    }
  }

  SlotStats stats;
  const long long slot = options_.base_slot + next_slot_;

  std::vector<double> spec_time(num_ssms, 0.0);
  for (int j = 0; j < num_ssms; ++j) {
    if (batch_size[j] > 0) {
      spec_time[j] =
          speculation_time(spec_.ssm_profiles[j], batch_size[j], spec_.window);
      stats.spec_max_sec = std::max(stats.spec_max_sec, spec_time[j]);
    }
  }

  std::vector<int> kv_lens;
  kv_lens.reserve(admitted_.size());
  for (int id : admitted_) {
    if (assignment[id] >= 0) {
      kv_lens.push_back(static_cast<int>(requests_[id].kv_len(spec_.window)));
    }
  }
  stats.served = static_cast<int>(kv_lens.size());
  if (stats.served > 0) {
    const VerifyBatchCost cost = verify_batch_cost(
        kv_lens, spec_.window, options_.packing, options_.pack_width);
    stats.verify_tokens = cost.tokens;
    stats.padding_tokens = cost.padding;
    stats.verify_sec = verification_time(spec_.llm, cost.tokens);
    stats.duration_sec = stats.spec_max_sec + stats.verify_sec;
  }

  for (int id : admitted_) {
    Request& r = requests_[id];
    const int j = assignment[id];
    SlotRecord rec;
    rec.slot = slot;
    rec.request_id = id;
    rec.ssm_id = j;
    rec.explore = explore;
    if (j >= 0) {
      const int prev = last_ssm_[id];
      rec.switched = prev >= 0 && prev != j;
      if (rec.switched) {
        rec.switch_cost_sec = switching_cost(
            r, prev, j, id < static_cast<int>(prewarm.size()) ? prewarm[id] : -1,
            spec_.ssm_profiles);
      }

      Rng rng(mix_seed(spec_.seed, kStreamOutcome, static_cast<std::uint64_t>(slot),
                       static_cast<std::uint64_t>(id)));
      r.active_ssm = j;
      const int accepted = sample_accepted_prefix(r, j, spec_.window, rng);
      const int bonus = spec_.bonus_token ? 1 : 0;

      rec.proposed = spec_.window;
      rec.accepted = accepted;
      rec.bonus = bonus;
      rec.wall_time_sec = spec_time[j] + stats.verify_sec;

      SpeculationOutcome outcome{id, j, spec_.window, accepted, bonus,
                                 rec.wall_time_sec};
      stats.outcomes.push_back(outcome);

      const long long emitted = accepted + bonus;
      r.generated_len = std::min(r.target_len, r.generated_len + emitted);
      if (r.generated_len >= r.target_len) {
        r.state = RequestState::Finished;
      }
      total_accepted += static_cast<double>(emitted);
      last_ssm_[id] = j;
    }
    if (history != nullptr) history->push_back(rec);
  }

  total_time_sec += stats.duration_sec;
  total_padding += stats.padding_tokens;
  total_verify_sec += stats.verify_sec;
  ++next_slot_;
  return stats;
}

std::vector<std::pair<int, int>> SlotEngine::refill_admitted() {
  std::vector<std::pair<int, int>> transfers;
  std::vector<int> kept;
  kept.reserve(admitted_.size());
  for (int id : admitted_) {
    if (requests_[id].state == RequestState::Finished) {
      int replacement = -1;
      while (next_waiting_ < static_cast<int>(requests_.size())) {
        Request& cand = requests_[next_waiting_++];
        if (cand.state == RequestState::Waiting) {
          cand.state = RequestState::Active;
          replacement = cand.id;
          break;
        }
      }
      transfers.emplace_back(id, replacement);
      if (replacement >= 0) kept.push_back(replacement);
    } else {
      kept.push_back(id);
    }
  }
  std::sort(kept.begin(), kept.end());
  admitted_ = std::move(kept);
  return transfers;
}

}  // namespace specsim
