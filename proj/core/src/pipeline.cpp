#include "specsim/pipeline.hpp"

#include <algorithm>
#include <deque>
#include <queue>
#include <tuple>

#include "specsim/errors.hpp"
#include "specsim/packing.hpp"
#include "specsim/rng.hpp"
#include "specsim/slot_engine.hpp"

namespace specsim {

namespace {

int draw_accepted(const PipelineScenario& scenario, const Request& request,
                  int ssm, long long slot) {
  Rng rng(mix_seed(scenario.seed, kStreamOutcome,
                   static_cast<std::uint64_t>(scenario.options.base_slot + slot),
                   static_cast<std::uint64_t>(request.id)));
  return sample_accepted_prefix(request, ssm, scenario.window, rng);
}

// Applies one verified round to a request; returns emitted tokens.
long long apply_outcome(const PipelineScenario& scenario, Request& request,
                        int accepted) {
  const long long emitted = accepted + (scenario.bonus_token ? 1 : 0);
  request.generated_len =
      std::min(request.target_len, request.generated_len + emitted);
  if (request.generated_len >= request.target_len) {
    request.state = RequestState::Finished;
  }
  return emitted;
}

// Requests assigned to each ssm: the first `capacity` unfinished ones are
// served, the rest wait in that ssm's queue.
struct SsmMembers {
  std::vector<int> active;
  std::deque<int> waiting;
};

std::vector<SsmMembers> collect_members(const PipelineScenario& scenario) {
  std::vector<SsmMembers> members(scenario.ssm_profiles.size());
  for (std::size_t i = 0; i < scenario.requests.size(); ++i) {
    const int j = scenario.assignment[i];
    if (j < 0) continue;
    if (j >= static_cast<int>(members.size())) {
      throw InputError("pipeline: assignment references unknown ssm");
    }
    if (scenario.requests[i].state == RequestState::Finished) continue;
    SsmMembers& m = members[j];
    if (static_cast<int>(m.active.size()) <
        scenario.ssm_profiles[j].batch_capacity) {
      m.active.push_back(static_cast<int>(i));
    } else {
      m.waiting.push_back(static_cast<int>(i));
    }
  }
  return members;
}

void sort_events(std::vector<Event>* events) {
  std::stable_sort(events->begin(), events->end(),
                   [](const Event& a, const Event& b) {
                     return std::tie(a.time_sec, a.kind, a.resource,
                                     a.micro_batch, a.slot) <
                            std::tie(b.time_sec, b.kind, b.resource,
                                     b.micro_batch, b.slot);
                   });
}

std::vector<int> kv_lens_of(const std::vector<Request>& requests,
                            const std::vector<int>& ids, int window) {
  std::vector<int> lens;
  lens.reserve(ids.size());
  for (int id : ids) {
    lens.push_back(static_cast<int>(requests[id].kv_len(window)));
  }
  return lens;
}

}  // namespace

MicroBatchPlan uniform_plan(const std::vector<int>& batch_sizes, int b) {
  MicroBatchPlan plan;
  plan.per_ssm.reserve(batch_sizes.size());
  for (int size : batch_sizes) {
    plan.per_ssm.push_back(std::max(1, std::min(b, size)));
  }
  return plan;
}

EventTrace simulate_serial(const PipelineScenario& scenario, long long slots) {
  EventTrace trace;
  std::vector<Request> requests = scenario.requests;
  PipelineScenario state = scenario;  // member bookkeeping works on copies
  state.requests = std::move(requests);
  std::vector<SsmMembers> members = collect_members(state);

  double now = 0.0;
  for (long long slot = 0; slot < slots; ++slot) {
    std::vector<int> served;
    double sync = now;
    for (std::size_t j = 0; j < members.size(); ++j) {
      const auto& active = members[j].active;
      if (active.empty()) continue;
      const double spec = speculation_time(
          state.ssm_profiles[j], static_cast<int>(active.size()), state.window);
      trace.events.push_back(
          {now, EventKind::SpecStart, static_cast<int>(j), 0, slot});
      trace.events.push_back(
          {now + spec, EventKind::SpecEnd, static_cast<int>(j), 0, slot});
      sync = std::max(sync, now + spec);
      served.insert(served.end(), active.begin(), active.end());
    }
    if (served.empty()) break;
    std::sort(served.begin(), served.end());

    const VerifyBatchCost cost =
        verify_batch_cost(kv_lens_of(state.requests, served, state.window),
                          state.window, state.options.packing,
                          state.options.pack_width);
    const double verify = verification_time(state.llm, cost.tokens);
    trace.events.push_back({sync, EventKind::VerifyStart, kLlmResource, 0, slot});
    trace.events.push_back(
        {sync + verify, EventKind::VerifyEnd, kLlmResource, 0, slot});
    trace.llm_busy_sec += verify;
    now = sync + verify;

    for (int id : served) {
      Request& r = state.requests[id];
      const int accepted = draw_accepted(state, r, state.assignment[id], slot);
      trace.accepted_tokens += apply_outcome(state, r, accepted);
    }
    for (auto& m : members) {
      for (int& id : m.active) {
        if (state.requests[id].state != RequestState::Finished) continue;
        int replacement = -1;
        while (!m.waiting.empty()) {
          const int cand = m.waiting.front();
          m.waiting.pop_front();
          if (state.requests[cand].state != RequestState::Finished) {
            replacement = cand;
            break;
          }
        }
        id = replacement;
      }
      m.active.erase(std::remove(m.active.begin(), m.active.end(), -1),
                     m.active.end());
    }
  }
  trace.llm_idle_sec = now - trace.llm_busy_sec;
  sort_events(&trace.events);
  return trace;
}

EventTrace simulate_pipelined(const PipelineScenario& scenario,
                              const MicroBatchPlan& plan, long long slots) {
  if (plan.per_ssm.size() != scenario.ssm_profiles.size()) {
    throw InputError("pipeline: plan size does not match ssm count");
  }
  for (int b : plan.per_ssm) {
    if (b < 1) throw InputError("pipeline: micro-batch counts must be >= 1");
  }
  if (plan.all_ones()) {
    return simulate_serial(scenario, slots);  // degenerate plan
  }

  EventTrace trace;
  PipelineScenario state = scenario;
  std::vector<SsmMembers> members = collect_members(state);
  const int num_ssms = static_cast<int>(state.ssm_profiles.size());

  // Fixed micro-batch groups: near-equal split in id order, remainder to
  // the earlier groups. Group positions are reused by replacements.
  std::vector<std::vector<std::vector<int>>> groups(num_ssms);
  for (int j = 0; j < num_ssms; ++j) {
    const auto& active = members[j].active;
    const int b = std::min<int>(plan.per_ssm[j],
                                std::max<int>(1, static_cast<int>(active.size())));
    groups[j].resize(b);
    const int n = static_cast<int>(active.size());
    const int base = b > 0 ? n / b : 0;
    const int extra = b > 0 ? n % b : 0;
    int cursor = 0;
    for (int m = 0; m < b; ++m) {
      const int size = base + (m < extra ? 1 : 0);
      for (int k = 0; k < size; ++k) groups[j][m].push_back(active[cursor++]);
    }
  }

  struct QueueItem {
    double arrival;
    int ssm;
    int mb;
    long long slot;
    std::vector<int> members;  // unfinished members at speculation time

    bool operator>(const QueueItem& other) const {
      return std::tie(arrival, ssm, mb) >
             std::tie(other.arrival, other.ssm, other.mb);
    }
  };
  std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>> llm_queue;

  enum class PendingKind { SpecEnd = 0, VerifyEnd = 1 };
  struct Pending {
    double time;
    PendingKind kind;
    int ssm;
    int mb;
    long long slot;
    std::vector<int> members;

    bool operator>(const Pending& other) const {
      return std::tie(time, kind, ssm, mb) >
             std::tie(other.time, other.kind, other.ssm, other.mb);
    }
  };
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> pending;

  std::vector<long long> seq_index(num_ssms, 0);  // slot-major (slot, mb) cursor
  std::vector<char> ssm_busy(num_ssms, 0);
  std::vector<std::vector<long long>> verified_through(num_ssms);
  for (int j = 0; j < num_ssms; ++j) {
    verified_through[j].assign(groups[j].size(), -1);
  }
  bool llm_busy = false;
  double llm_last_end = 0.0;

  auto advance_ssm = [&](int j, double now) {
    if (ssm_busy[j] || groups[j].empty()) return;
    const int b = static_cast<int>(groups[j].size());
    while (true) {
      const long long slot = seq_index[j] / b;
      const int mb = static_cast<int>(seq_index[j] % b);
      if (slot >= slots) return;
      if (slot > 0 && verified_through[j][mb] < slot - 1) return;  // blocked
      std::vector<int> alive;
      for (int id : groups[j][mb]) {
        if (state.requests[id].state != RequestState::Finished) {
          alive.push_back(id);
        }
      }
      if (alive.empty()) {
        verified_through[j][mb] = slot;  // nothing to run or verify
        ++seq_index[j];
        continue;
      }
      const double spec = speculation_time(
          state.ssm_profiles[j], static_cast<int>(alive.size()), state.window);
      trace.events.push_back({now, EventKind::SpecStart, j, mb, slot});
      trace.events.push_back({now + spec, EventKind::SpecEnd, j, mb, slot});
      ssm_busy[j] = 1;
      pending.push({now + spec, PendingKind::SpecEnd, j, mb, slot,
                    std::move(alive)});
      ++seq_index[j];
      return;
    }
  };

  auto dispatch_llm = [&](double now) {
    if (llm_busy || llm_queue.empty()) return;
    QueueItem item = llm_queue.top();
    llm_queue.pop();
    const double start = std::max({now, llm_last_end, item.arrival});
    const VerifyBatchCost cost = verify_batch_cost(
        kv_lens_of(state.requests, item.members, state.window), state.window,
        state.options.packing, state.options.pack_width);
    const double verify = verification_time(state.llm, cost.tokens);
    trace.events.push_back(
        {start, EventKind::VerifyStart, kLlmResource, item.mb, item.slot});
    trace.events.push_back(
        {start + verify, EventKind::VerifyEnd, kLlmResource, item.mb, item.slot});
    trace.llm_busy_sec += verify;
    llm_busy = true;
    pending.push({start + verify, PendingKind::VerifyEnd, item.ssm, item.mb,
                  item.slot, std::move(item.members)});
  };

  for (int j = 0; j < num_ssms; ++j) advance_ssm(j, 0.0);
  double now = 0.0;
  while (!pending.empty()) {
    Pending ev = pending.top();
    pending.pop();
    now = ev.time;
    if (ev.kind == PendingKind::SpecEnd) {
      ssm_busy[ev.ssm] = 0;
      llm_queue.push({now, ev.ssm, ev.mb, ev.slot, std::move(ev.members)});
      advance_ssm(ev.ssm, now);
      dispatch_llm(now);
    } else {
      llm_busy = false;
      llm_last_end = now;
      for (int id : ev.members) {
        Request& r = state.requests[id];
        const int accepted =
            draw_accepted(state, r, state.assignment[id], ev.slot);
        trace.accepted_tokens += apply_outcome(state, r, accepted);
      }
      // Replacements take over the vacated group positions and start at
      // the next slot of the same micro-batch.
      for (int& id : groups[ev.ssm][ev.mb]) {
        if (state.requests[id].state != RequestState::Finished) continue;
        auto& waiting = members[ev.ssm].waiting;
        while (!waiting.empty()) {
          const int cand = waiting.front();
          waiting.pop_front();
          if (state.requests[cand].state != RequestState::Finished) {
            state.assignment[cand] = ev.ssm;
            id = cand;
            break;
          }
        }
      }
      verified_through[ev.ssm][ev.mb] =
          std::max(verified_through[ev.ssm][ev.mb], ev.slot);
      advance_ssm(ev.ssm, now);
      dispatch_llm(now);
    }
  }

  trace.llm_idle_sec = now - trace.llm_busy_sec;
  sort_events(&trace.events);
  return trace;
}

ThroughputStats throughput(const EventTrace& trace) {
  if (trace.empty()) {
    throw MetricError("throughput: empty trace");
  }
  const double makespan = trace.makespan();
  if (!(makespan > 0.0)) {
    throw MetricError("throughput: zero-length trace");
  }
  ThroughputStats stats;
  stats.tokens_per_sec = static_cast<double>(trace.accepted_tokens) / makespan;
  stats.idle_fraction = trace.llm_idle_sec / makespan;
  return stats;
}

MicroBatchPlan tune_micro_batches(const PipelineScenario& scenario,
                                  const TuneConfig& config,
                                  std::vector<double>* probe_curve) {
  std::vector<SsmMembers> members = collect_members(scenario);
  std::vector<int> batch_sizes;
  int largest = 1;
  batch_sizes.reserve(members.size());
  for (const auto& m : members) {
    batch_sizes.push_back(static_cast<int>(m.active.size()));
    largest = std::max(largest, static_cast<int>(m.active.size()));
  }

  std::vector<int> candidates{1};
  const int cap = std::min(config.max_micro_batches, largest);
  for (int b = std::max(2, config.initial_micro_batches); b <= cap; ++b) {
    candidates.push_back(b);
  }

  MicroBatchPlan last_good = uniform_plan(batch_sizes, 1);
  double best = -1.0;
  for (int b : candidates) {
    const MicroBatchPlan plan = uniform_plan(batch_sizes, b);
    const EventTrace trace =
        simulate_pipelined(scenario, plan, config.probe_slots);
    const double tput =
        trace.empty() ? 0.0 : throughput(trace).tokens_per_sec;
    if (probe_curve != nullptr) probe_curve->push_back(tput);
    best = std::max(best, tput);
    if (tput >= (1.0 - config.degradation_threshold) * best) {
      last_good = plan;
    } else {
      break;  // first clear degradation ends the search
    }
  }
  return last_good;
}

}  // namespace specsim
