#include "specsim/policies.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "specsim/errors.hpp"

namespace specsim {

namespace {

PolicyRunResult finish_run(SlotEngine& engine, PolicyRunResult run) {
  run.accepted_tokens = engine.total_accepted;
  run.total_time_sec = engine.total_time_sec;
  run.padding_tokens = engine.total_padding;
  run.verify_time_sec = engine.total_verify_sec;
  run.requests = engine.requests();
  return run;
}

}  // namespace

PolicyRunResult run_epsilon_greedy(double epsilon, const WorkloadSpec& spec,
                                   long long max_slots,
                                   const EngineOptions& engine_options) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw ConfigError("epsilon-greedy: epsilon must be in [0, 1]");
  }
  std::vector<Request> requests = generate_workload(spec);
  SlotEngine engine(spec, std::move(requests), engine_options);
  Rng rng(mix_seed(spec.seed, kStreamPolicy));

  const int num_requests = static_cast<int>(engine.requests().size());
  const int num_ssms = static_cast<int>(spec.ssm_profiles.size());
  PolicyRunResult run;
  run.state = BanditState::make(num_requests, num_ssms);
  const std::vector<int> no_prewarm(num_requests, -1);

  for (long long slot = 0; slot < max_slots && !engine.all_finished(); ++slot) {
    std::vector<int> desired(num_requests, -1);
    if (rng.bernoulli(epsilon)) {
      // Exploit: each request claims its best-observed model.
      for (int id : engine.admitted()) {
        const auto& arms = run.state.estimates[id];
        int best = 0;
        double best_mean = arms[0].optimistic_mean();
        for (int j = 1; j < num_ssms; ++j) {
          const double m = arms[j].optimistic_mean();
          if (m > best_mean) {
            best_mean = m;
            best = j;
          }
        }
        desired[id] = best;
      }
    } else {
      for (int id : engine.admitted()) {
        desired[id] = static_cast<int>(rng.uniform_int(0, num_ssms - 1));
      }
    }
    const std::vector<int> assign = resolve_capacity_overflow(
        desired, engine.admitted(), spec.ssm_profiles, rng);
    run.state.assignment = assign;
    SlotStats stats =
        engine.run_slot(assign, no_prewarm, /*explore=*/false, &run.history);
    run.slot_durations.push_back(stats.duration_sec);
    for (const SpeculationOutcome& outcome : stats.outcomes) {
      run.state.estimates[outcome.request_id][outcome.ssm_id].add(
          observed_goodput(outcome));
    }
    engine.refill_admitted();
  }
  run.final_assignment = run.state.assignment;
  return finish_run(engine, std::move(run));
}

PolicyRunResult run_greedy(const WorkloadSpec& spec, long long max_slots,
                           const EngineOptions& engine_options) {
  std::vector<Request> requests = generate_workload(spec);
  SlotEngine engine(spec, std::move(requests), engine_options);

  const int num_requests = static_cast<int>(engine.requests().size());
  const int num_ssms = static_cast<int>(spec.ssm_profiles.size());

  // Fastest model first: speculation speed stands in for (inverse) size.
  std::vector<int> by_size(num_ssms);
  std::iota(by_size.begin(), by_size.end(), 0);
  std::stable_sort(by_size.begin(), by_size.end(), [&](int a, int b) {
    return spec.ssm_profiles[a].tokens_per_sec >
           spec.ssm_profiles[b].tokens_per_sec;
  });

  std::vector<int> by_prompt = engine.admitted();
  std::stable_sort(by_prompt.begin(), by_prompt.end(), [&](int a, int b) {
    return engine.requests()[a].prompt_len < engine.requests()[b].prompt_len;
  });

  std::vector<int> assign(num_requests, -1);
  std::size_t cursor = 0;
  for (int j : by_size) {
    for (int c = 0; c < spec.ssm_profiles[j].batch_capacity &&
                    cursor < by_prompt.size();
         ++c) {
      assign[by_prompt[cursor++]] = j;
    }
  }

  PolicyRunResult run;
  run.state = BanditState::make(num_requests, num_ssms);
  const std::vector<int> no_prewarm(num_requests, -1);
  for (long long slot = 0; slot < max_slots && !engine.all_finished(); ++slot) {
    run.state.assignment = assign;
    SlotStats stats =
        engine.run_slot(assign, no_prewarm, /*explore=*/false, &run.history);
    run.slot_durations.push_back(stats.duration_sec);
    for (const auto& [gone, replacement] : engine.refill_admitted()) {
      if (replacement >= 0) assign[replacement] = assign[gone];
      assign[gone] = -1;
    }
  }
  run.final_assignment = assign;
  return finish_run(engine, std::move(run));
}

WorkloadSpec homogeneous_spec(const WorkloadSpec& spec, int ssm_type) {
  if (ssm_type < 0 ||
      static_cast<std::size_t>(ssm_type) >= spec.ssm_profiles.size()) {
    throw ConfigError("vanilla: unknown ssm type " + std::to_string(ssm_type));
  }
  WorkloadSpec mono = spec;
  const SsmProfile& base = spec.ssm_profiles[ssm_type];
  for (auto& s : mono.ssm_profiles) {
    s.tokens_per_sec = base.tokens_per_sec;
    s.batch_slowdown = base.batch_slowdown;
  }
  for (auto& cls : mono.difficulty_mix) {
    for (auto& range : cls.accept_range) {
      range = cls.accept_range[ssm_type];
    }
  }
  return mono;
}

std::vector<Request> homogenize_requests(std::vector<Request> requests,
                                         int ssm_type) {
  for (Request& r : requests) {
    const double p = r.accept_prob[ssm_type];
    for (double& q : r.accept_prob) q = p;
  }
  return requests;
}

PolicyRunResult run_vanilla(int ssm_type, const WorkloadSpec& spec,
                            long long max_slots,
                            const EngineOptions& engine_options) {
  // Generate from the original spec so the same requests (same draws) are
  // compared across baselines, then make every instance act like ssm_type.
  std::vector<Request> requests =
      homogenize_requests(generate_workload(spec), ssm_type);
  const WorkloadSpec mono = homogeneous_spec(spec, ssm_type);
  SlotEngine engine(mono, std::move(requests), engine_options);

  const int num_requests = static_cast<int>(engine.requests().size());
  const int num_ssms = static_cast<int>(mono.ssm_profiles.size());

  // Round-robin over instances with residual capacity.
  std::vector<int> assign(num_requests, -1);
  std::vector<int> load(num_ssms, 0);
  int wheel = 0;
  for (int id : engine.admitted()) {
    for (int tries = 0; tries < num_ssms; ++tries) {
      const int j = (wheel + tries) % num_ssms;
      if (load[j] < mono.ssm_profiles[j].batch_capacity) {
        assign[id] = j;
        ++load[j];
        wheel = (j + 1) % num_ssms;
        break;
      }
    }
  }

  PolicyRunResult run;
  run.state = BanditState::make(num_requests, num_ssms);
  const std::vector<int> no_prewarm(num_requests, -1);
  for (long long slot = 0; slot < max_slots && !engine.all_finished(); ++slot) {
    run.state.assignment = assign;
    SlotStats stats =
        engine.run_slot(assign, no_prewarm, /*explore=*/false, &run.history);
    run.slot_durations.push_back(stats.duration_sec);
    for (const auto& [gone, replacement] : engine.refill_admitted()) {
      if (replacement >= 0) assign[replacement] = assign[gone];
      assign[gone] = -1;
    }
  }
  run.final_assignment = assign;
  return finish_run(engine, std::move(run));
}

}  // namespace specsim
