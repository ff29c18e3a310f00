#include "specsim/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "specsim/errors.hpp"

namespace specsim {

void validate(const BanditConfig& config) {
  if (config.alpha < 1) throw ConfigError("bandit: alpha must be at least 1");
  if (config.beta < 1) throw ConfigError("bandit: beta must be at least 1");
  if (config.alpha % config.beta != 0) {
    throw ConfigError("bandit: beta must divide alpha");
  }
  if (config.lambda < 0.0) {
    throw ConfigError("bandit: lambda must be non-negative");
  }
  if (config.max_slots < 1) {
    throw ConfigError("bandit: max_slots must be at least 1");
  }
}

BanditState BanditState::make(int num_requests, int num_ssms) {
  BanditState state;
  state.estimates.assign(num_requests, std::vector<ArmEstimate>(num_ssms));
  state.assignment.assign(num_requests, -1);
  state.prewarmed.assign(num_requests, -1);
  return state;
}

EpochPhase phase_of_slot(const BanditConfig& config, long long t) {
  EpochPhase phase;
  long long offset = t;
  long long exploit = 2;
  for (int k = 1;; ++k) {
    if (offset < config.alpha) {
      phase.epoch = k;
      phase.explore = true;
      return phase;
    }
    offset -= config.alpha;
    if (offset < exploit) {
      phase.epoch = k;
      phase.explore = false;
      return phase;
    }
    offset -= exploit;
    exploit = exploit >= (1LL << 62) ? exploit : exploit * 2;
  }
}

long long exploitation_duration(int epoch, long long remaining_slots) {
  if (epoch < 1) throw InputError("exploitation_duration: epoch must be >= 1");
  const long long length =
      epoch >= 62 ? std::numeric_limits<long long>::max() : (1LL << epoch);
  return std::min(length, remaining_slots);
}

std::vector<int> resolve_capacity_overflow(const std::vector<int>& desired,
                                           const std::vector<int>& admitted,
                                           const std::vector<SsmProfile>& ssms,
                                           Rng& rng) {
  const int num_ssms = static_cast<int>(ssms.size());
  std::vector<int> result = desired;
  std::vector<std::vector<int>> claimants(num_ssms);
  for (int id : admitted) {
    const int j = result[id];
    if (j >= 0) claimants[j].push_back(id);
  }
  std::vector<int> load(num_ssms, 0);
  std::vector<int> overflow;
  for (int j = 0; j < num_ssms; ++j) {
    const int cap = ssms[j].batch_capacity;
    if (static_cast<int>(claimants[j].size()) <= cap) {
      load[j] = static_cast<int>(claimants[j].size());
      continue;
    }
    // Keep a uniformly random subset of size cap; shuffle then split.
    std::vector<int>& members = claimants[j];
    for (int i = static_cast<int>(members.size()) - 1; i > 0; --i) {
      const int k = static_cast<int>(rng.uniform_int(0, i));
      std::swap(members[i], members[k]);
    }
    load[j] = cap;
    for (std::size_t i = cap; i < members.size(); ++i) {
      overflow.push_back(members[i]);
    }
  }
  std::sort(overflow.begin(), overflow.end());
  for (int id : overflow) {
    std::vector<int> open;
    for (int j = 0; j < num_ssms; ++j) {
      if (load[j] < ssms[j].batch_capacity) open.push_back(j);
    }
    if (open.empty()) {
      result[id] = -1;  // idles the chunk, no estimate update
      continue;
    }
    const int j = open[rng.uniform_int(0, static_cast<int>(open.size()) - 1)];
    result[id] = j;
    ++load[j];
  }
  return result;
}

std::vector<int> draw_exploration_assignment(const std::vector<int>& admitted,
                                             const std::vector<SsmProfile>& ssms,
                                             int num_requests, Rng& rng) {
  if (ssms.empty()) {
    throw ConfigError("exploration: no ssms to draw from");
  }
  std::vector<int> desired(num_requests, -1);
  for (int id : admitted) {
    desired[id] =
        static_cast<int>(rng.uniform_int(0, static_cast<int>(ssms.size()) - 1));
  }
  return resolve_capacity_overflow(desired, admitted, ssms, rng);
}

std::vector<int> prewarm_destination(const BanditState& state,
                                     const std::vector<int>& admitted) {
  std::vector<int> prewarm(state.estimates.size(), -1);
  for (int id : admitted) {
    const auto& arms = state.estimates[id];
    int best = 0;
    double best_mean = arms.empty() ? 0.0 : arms[0].optimistic_mean();
    for (std::size_t j = 1; j < arms.size(); ++j) {
      const double m = arms[j].optimistic_mean();
      if (m > best_mean) {  // ties keep the lowest ssm id
        best_mean = m;
        best = static_cast<int>(j);
      }
    }
    prewarm[id] = best;
  }
  return prewarm;
}

long long run_exploration_epoch(BanditState& state, const BanditConfig& config,
                                SlotEngine& engine, Rng& rng, long long budget,
                                std::vector<SlotRecord>* history,
                                const SlotHook& hook) {
  validate(config);
  if (engine.spec().total_capacity() == 0) {
    throw ConfigError("exploration: total ssm capacity is zero");
  }
  const auto& ssms = engine.spec().ssm_profiles;
  const int num_requests = static_cast<int>(engine.requests().size());
  long long executed = 0;
  const int chunks = config.alpha / config.beta;
  for (int chunk = 0; chunk < chunks && executed < budget; ++chunk) {
    if (engine.all_finished()) break;
    std::vector<int> assign =
        draw_exploration_assignment(engine.admitted(), ssms, num_requests, rng);
    // The draw happens one chunk ahead of its first slot, so the
    // destination KV caches are prewarmed and the chunk-boundary switch is
    // free.
    state.prewarmed = assign;
    state.assignment = assign;
    for (int s = 0; s < config.beta && executed < budget; ++s) {
      const std::size_t first_row = history ? history->size() : 0;
      SlotStats stats =
          engine.run_slot(assign, state.prewarmed, /*explore=*/true, history);
      for (const SpeculationOutcome& outcome : stats.outcomes) {
        state.estimates[outcome.request_id][outcome.ssm_id].add(
            observed_goodput(outcome));
      }
      if (hook) hook(stats, first_row);
      ++executed;
      for (const auto& [gone, replacement] : engine.refill_admitted()) {
        if (replacement >= 0) {
          assign[replacement] = assign[gone];
          state.prewarmed[replacement] = assign[gone];
        }
        assign[gone] = -1;
      }
      state.assignment = assign;
      if (engine.all_finished()) break;
    }
  }
  return executed;
}

std::vector<int> plan_exploitation(const BanditState& state,
                                   const std::vector<int>& admitted,
                                   const std::vector<SsmProfile>& ssms) {
  std::vector<int> assignment(state.estimates.size(), -1);
  if (admitted.empty()) return assignment;

  MatchingInstance instance;
  instance.capacities.reserve(ssms.size());
  for (const auto& s : ssms) instance.capacities.push_back(s.batch_capacity);

  double max_finite = 0.0;
  bool any_finite = false;
  for (int id : admitted) {
    for (const ArmEstimate& arm : state.estimates[id]) {
      if (arm.observed()) {
        max_finite = any_finite ? std::max(max_finite, arm.mean()) : arm.mean();
        any_finite = true;
      }
    }
  }
  // Cold-start arms are optimistic infinities; clamp them to one above the
  // best finite estimate so the matcher sees finite weights but still
  // prefers unexplored arms.
  const double cold_start = any_finite ? max_finite + 1.0 : 1.0;

  instance.weights.reserve(admitted.size());
  for (int id : admitted) {
    std::vector<double> row(ssms.size());
    for (std::size_t j = 0; j < ssms.size(); ++j) {
      const ArmEstimate& arm = state.estimates[id][j];
      row[j] = arm.observed() ? arm.mean() : cold_start;
    }
    instance.weights.push_back(std::move(row));
  }

  const MatchResult result = solve_max_weight_matching(instance);
  for (std::size_t row = 0; row < admitted.size(); ++row) {
    assignment[admitted[row]] = result.assignment[row];
  }
  return assignment;
}

namespace {

// Pseudo-regret increment of one slot: optimal fixed assignment value
// minus the value of the arms actually pulled (an idle request forgoes its
// full optimum).
double pseudo_increment(const std::vector<std::vector<double>>& g,
                        const std::vector<int>& x_star,
                        const std::vector<int>& admitted,
                        const std::vector<int>& assignment) {
  double inc = 0.0;
  for (int id : admitted) {
    const double best = x_star[id] >= 0 ? g[id][x_star[id]] : 0.0;
    const double got = assignment[id] >= 0 ? g[id][assignment[id]] : 0.0;
    inc += best - got;
  }
  return inc;
}

}  // namespace

PolicyRunResult run_lbss(const BanditConfig& config, const WorkloadSpec& spec,
                         const LbssOptions& options) {
  validate(config);
  std::vector<Request> requests = generate_workload(spec);
  SlotEngine engine(spec, std::move(requests), options.engine);
  Rng rng(mix_seed(spec.seed, kStreamPolicy));

  const int num_requests = static_cast<int>(engine.requests().size());
  const int num_ssms = static_cast<int>(spec.ssm_profiles.size());
  PolicyRunResult run;
  run.state = BanditState::make(num_requests, num_ssms);
  run.ledger.lambda = config.lambda;

  std::vector<int> x_star;
  if (options.ground_truth != nullptr) {
    MatchingInstance truth;
    truth.weights = *options.ground_truth;
    for (const auto& s : spec.ssm_profiles) {
      truth.capacities.push_back(s.batch_capacity);
    }
    x_star = solve_max_weight_matching(truth).assignment;
  }

  const SlotHook account = [&](const SlotStats& stats, std::size_t first_row) {
    run.slot_durations.push_back(stats.duration_sec);
    if (options.ground_truth != nullptr) {
      run.ledger.goodput_regret +=
          pseudo_increment(*options.ground_truth, x_star, engine.admitted(),
                           run.state.assignment);
    }
    for (std::size_t r = first_row; r < run.history.size(); ++r) {
      run.ledger.switching_cost += run.history[r].switch_cost_sec;
    }
  };

  auto mark_curve = [&](long long slots_done) {
    run.regret_curve.push_back({slots_done, run.state.epoch,
                                run.ledger.goodput_regret,
                                run.ledger.switching_cost, run.ledger.total()});
  };

  long long slot = 0;
  while (slot < config.max_slots && !engine.all_finished()) {
    slot += run_exploration_epoch(run.state, config, engine, rng,
                                  config.max_slots - slot, &run.history,
                                  account);
    if (slot >= config.max_slots || engine.all_finished()) {
      mark_curve(slot);
      break;
    }

    // Exploitation stage: matcher on the estimates, run for 2^k slots.
    // The argmax prewarm is decided before the matching, so a switch whose
    // destination coincides with it costs nothing.
    run.state.prewarmed = prewarm_destination(run.state, engine.admitted());
    std::vector<int> plan =
        plan_exploitation(run.state, engine.admitted(), spec.ssm_profiles);
    run.state.assignment = plan;
    const long long duration =
        exploitation_duration(run.state.epoch, config.max_slots - slot);
    for (long long s = 0; s < duration; ++s) {
      const std::size_t first_row = run.history.size();
      SlotStats stats = engine.run_slot(plan, run.state.prewarmed,
                                        /*explore=*/false, &run.history);
      account(stats, first_row);
      ++slot;
      for (const auto& [gone, replacement] : engine.refill_admitted()) {
        if (replacement >= 0) plan[replacement] = plan[gone];
        plan[gone] = -1;
      }
      run.state.assignment = plan;
      if (engine.all_finished()) break;
    }
    mark_curve(slot);
    ++run.state.epoch;
  }

  run.accepted_tokens = engine.total_accepted;
  run.total_time_sec = engine.total_time_sec;
  run.padding_tokens = engine.total_padding;
  run.verify_time_sec = engine.total_verify_sec;
  run.final_assignment = run.state.assignment;
  run.requests = engine.requests();
  return run;
}

RegretBreakdown cumulative_regret(
    const std::vector<std::vector<double>>& ground_truth,
    const std::vector<int>& capacities, const std::vector<SlotRecord>& history,
    double lambda, long long total_slots) {
  if (ground_truth.empty()) {
    throw InputError("cumulative_regret: ground truth required");
  }
  MatchingInstance instance;
  instance.weights = ground_truth;
  instance.capacities = capacities;
  const MatchResult best = solve_max_weight_matching(instance);

  RegretBreakdown out;
  out.optimal_assignment = best.assignment;
  double optimal_sum = 0.0;
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    if (best.assignment[i] >= 0) {
      optimal_sum += ground_truth[i][best.assignment[i]];
    }
  }
  double realized = 0.0;
  for (const SlotRecord& rec : history) {
    if (rec.ssm_id >= 0 && rec.wall_time_sec > 0.0) {
      realized += static_cast<double>(rec.accepted + rec.bonus) /
                  rec.wall_time_sec;
    }
    out.switching_term += rec.switch_cost_sec;
  }
  out.goodput_term = static_cast<double>(total_slots) * optimal_sum - realized;
  out.total = out.goodput_term + lambda * out.switching_term;
  return out;
}

}  // namespace specsim
