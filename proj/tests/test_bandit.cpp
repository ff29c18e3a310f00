#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <specsim/bandit.hpp>
#include <specsim/errors.hpp>
#include <specsim/experiment.hpp>
#include <specsim/matching.hpp>

using namespace specsim;

namespace {

// Exact acceptance probabilities, zero batch slowdown, so every arm's
// expected goodput has a closed form.
WorkloadSpec flat_spec(int num_requests, std::vector<double> p_by_ssm,
                       std::vector<int> capacities, std::uint64_t seed) {
  WorkloadSpec spec;
  spec.num_requests = num_requests;
  spec.window = 4;
  spec.seed = seed;
  spec.bonus_token = false;
  for (std::size_t j = 0; j < capacities.size(); ++j) {
    spec.ssm_profiles.push_back(
        {static_cast<int>(j), 1000.0 / (1.0 + j), capacities[j], 0.0});
  }
  spec.llm = {0.01, 0.0};
  DifficultyClass cls;
  cls.weight = 1.0;
  cls.prompt_len_lo = cls.prompt_len_hi = 50;
  cls.target_len_lo = cls.target_len_hi = 1000000000;
  for (double p : p_by_ssm) cls.accept_range.push_back({p, p});
  spec.difficulty_mix = {cls};
  return spec;
}

std::map<long long, std::map<int, int>> assignments_by_slot(
    const std::vector<SlotRecord>& history) {
  std::map<long long, std::map<int, int>> by_slot;
  for (const SlotRecord& rec : history) {
    by_slot[rec.slot][rec.request_id] = rec.ssm_id;
  }
  return by_slot;
}

}  // namespace

TEST_CASE("bandit config validation") {
  BanditConfig config;
  config.alpha = 8;
  config.beta = 3;
  config.max_slots = 10;
  CHECK_THROWS_AS(validate(config), ConfigError);
  config.beta = 2;
  CHECK_NOTHROW(validate(config));
  config.lambda = -1.0;
  CHECK_THROWS_AS(validate(config), ConfigError);
}

TEST_CASE("exploitation stage lengths double per epoch") {
  CHECK(exploitation_duration(1, 1000) == 2);
  CHECK(exploitation_duration(5, 1000) == 32);
  CHECK(exploitation_duration(5, 7) == 7);
  CHECK(exploitation_duration(62, 1000) == 1000);
  CHECK_THROWS_AS(exploitation_duration(0, 10), InputError);
}

TEST_CASE("epoch phase is a pure function of the schedule") {
  BanditConfig config;
  config.alpha = 8;
  config.beta = 2;
  config.max_slots = 1 << 20;
  // Epoch 1: slots [0,8) explore, [8,10) exploit; epoch 2: [10,18), [18,22).
  CHECK(phase_of_slot(config, 0).explore);
  CHECK(phase_of_slot(config, 0).epoch == 1);
  CHECK(phase_of_slot(config, 7).explore);
  CHECK_FALSE(phase_of_slot(config, 8).explore);
  CHECK_FALSE(phase_of_slot(config, 9).explore);
  CHECK(phase_of_slot(config, 10).explore);
  CHECK(phase_of_slot(config, 10).epoch == 2);
  CHECK_FALSE(phase_of_slot(config, 18).explore);
  CHECK(phase_of_slot(config, 22).epoch == 3);
}

TEST_CASE("switching cost model") {
  std::vector<SsmProfile> ssms{{0, 1000.0, 8, 0.0}, {1, 500.0, 8, 0.0}};
  Request r;
  r.prompt_len = 60;
  r.generated_len = 40;
  CHECK(switching_cost(r, 0, 0, -1, ssms) == 0.0);
  CHECK(switching_cost(r, 1, 0, -1, ssms) == doctest::Approx(0.1));
  CHECK(switching_cost(r, 0, 1, -1, ssms) == doctest::Approx(0.2));
  CHECK(switching_cost(r, 0, 1, 1, ssms) == 0.0);  // prewarmed destination
  CHECK(switching_cost(r, -1, 1, -1, ssms) == 0.0);  // first placement
}

TEST_CASE("prewarm picks the highest estimated arm") {
  BanditState state = BanditState::make(2, 3);
  state.estimates[0][0].add(5.0);
  state.estimates[0][1].add(9.0);
  state.estimates[0][2].add(1.0);
  // Request 1 ties on arms 1 and 2.
  state.estimates[1][0].add(1.0);
  state.estimates[1][1].add(4.0);
  state.estimates[1][2].add(4.0);
  const std::vector<int> prewarm = prewarm_destination(state, {0, 1});
  CHECK(prewarm[0] == 1);
  CHECK(prewarm[1] == 1);  // lowest ssm id on ties

  SUBCASE("unobserved arms are optimistic") {
    BanditState cold = BanditState::make(1, 2);
    cold.estimates[0][0].add(100.0);
    CHECK(prewarm_destination(cold, {0})[0] == 1);
  }
}

TEST_CASE("capacity overflow keeps batches within bounds") {
  std::vector<SsmProfile> ssms{{0, 1000.0, 2, 0.0}, {1, 500.0, 2, 0.0}};
  Rng rng(5);
  std::vector<int> admitted{0, 1, 2, 3};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> desired{0, 0, 0, 0};  // everyone wants ssm 0
    const std::vector<int> resolved =
        resolve_capacity_overflow(desired, admitted, ssms, rng);
    int on0 = 0, on1 = 0;
    for (int id : admitted) {
      if (resolved[id] == 0) ++on0;
      if (resolved[id] == 1) ++on1;
    }
    CHECK(on0 == 2);
    CHECK(on1 == 2);  // everyone lands somewhere while slots remain
  }
}

TEST_CASE("overflow idles requests only when nothing has room") {
  std::vector<SsmProfile> ssms{{0, 1000.0, 1, 0.0}};
  Rng rng(6);
  std::vector<int> desired{0, 0, 0};
  const std::vector<int> resolved =
      resolve_capacity_overflow(desired, {0, 1, 2}, ssms, rng);
  int placed = 0, idle = 0;
  for (int id : {0, 1, 2}) {
    resolved[id] >= 0 ? ++placed : ++idle;
  }
  CHECK(placed == 1);
  CHECK(idle == 2);
}

TEST_CASE("single model exploration never switches") {
  WorkloadSpec spec = flat_spec(4, {0.7}, {8}, 11);
  SlotEngine engine(spec, generate_workload(spec));
  BanditState state = BanditState::make(4, 1);
  BanditConfig config;
  config.alpha = 8;
  config.beta = 2;
  config.max_slots = 8;
  Rng rng(1);
  std::vector<SlotRecord> history;
  const long long executed =
      run_exploration_epoch(state, config, engine, rng, 8, &history);
  CHECK(executed == 8);
  for (const SlotRecord& rec : history) {
    CHECK(rec.ssm_id == 0);
    CHECK_FALSE(rec.switched);
    CHECK(rec.switch_cost_sec == 0.0);
  }
}

TEST_CASE("chunked exploration changes arms only at chunk boundaries") {
  WorkloadSpec spec = flat_spec(6, {0.6, 0.4, 0.8}, {4, 4, 4}, 21);
  SlotEngine engine(spec, generate_workload(spec));
  BanditState state = BanditState::make(6, 3);
  BanditConfig config;
  config.alpha = 8;
  config.beta = 2;
  config.max_slots = 8;
  Rng rng(2);
  std::vector<SlotRecord> history;
  run_exploration_epoch(state, config, engine, rng, 8, &history);

  const auto by_slot = assignments_by_slot(history);
  CHECK(by_slot.size() == 8);  // alpha slots, four chunks of two
  for (int request = 0; request < 6; ++request) {
    for (long long chunk = 0; chunk < 4; ++chunk) {
      CHECK(by_slot.at(2 * chunk).at(request) ==
            by_slot.at(2 * chunk + 1).at(request));
    }
  }
  // Exploration switches are prewarmed, so they are free.
  for (const SlotRecord& rec : history) {
    CHECK(rec.switch_cost_sec == 0.0);
  }
}

TEST_CASE("exploration estimates approach the closed-form goodput") {
  // Two requests, two models, slowdown-free: wall time is exactly
  // window / speed + verification overhead no matter the batch split.
  WorkloadSpec spec = flat_spec(2, {0.6, 0.9}, {2, 2}, 31);
  SlotEngine engine(spec, generate_workload(spec));
  BanditState state = BanditState::make(2, 2);
  BanditConfig config;
  config.alpha = 200;
  config.beta = 2;
  config.max_slots = 200;
  Rng rng(3);
  run_exploration_epoch(state, config, engine, rng, 200, nullptr);

  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double wall =
          speculation_time(spec.ssm_profiles[j], 1, spec.window) +
          verification_time(spec.llm, 0) +
          spec.llm.per_token_sec;  // per_token is zero here
      const double expect =
          expected_accepted_prefix(j == 0 ? 0.6 : 0.9, spec.window) / wall;
      REQUIRE(state.estimates[i][j].observed());
      CHECK(std::abs(state.estimates[i][j].mean() - expect) / expect < 0.10);
    }
  }
}

TEST_CASE("exploration requires capacity") {
  WorkloadSpec spec = flat_spec(2, {0.5}, {4}, 41);
  std::vector<Request> requests = generate_workload(spec);
  spec.ssm_profiles.clear();  // engine accepts it; exploration must not
  SlotEngine engine(spec, std::move(requests));
  BanditState state = BanditState::make(2, 0);
  BanditConfig config;
  config.max_slots = 4;
  Rng rng(4);
  CHECK_THROWS_AS(run_exploration_epoch(state, config, engine, rng, 4, nullptr),
                  ConfigError);
}

TEST_CASE("exploitation planning uses the matcher") {
  BanditState state = BanditState::make(2, 2);
  state.estimates[0][0].add(10.0);
  state.estimates[0][1].add(5.0);
  state.estimates[1][0].add(9.0);
  state.estimates[1][1].add(1.0);
  std::vector<SsmProfile> ssms{{0, 1000.0, 1, 0.0}, {1, 500.0, 1, 0.0}};
  const std::vector<int> plan = plan_exploitation(state, {0, 1}, ssms);
  CHECK(plan == std::vector<int>{1, 0});

  SUBCASE("single pair") {
    BanditState tiny = BanditState::make(1, 1);
    tiny.estimates[0][0].add(3.0);
    std::vector<SsmProfile> one{{0, 1000.0, 1, 0.0}};
    CHECK(plan_exploitation(tiny, {0}, one) == std::vector<int>{0});
  }

  SUBCASE("cold-start arms outrank every observed one") {
    BanditState cold = BanditState::make(1, 2);
    cold.estimates[0][0].add(5.0);  // arm 1 unobserved
    std::vector<SsmProfile> two{{0, 1000.0, 1, 0.0}, {1, 500.0, 1, 0.0}};
    CHECK(plan_exploitation(cold, {0}, two) == std::vector<int>{1});
  }

  SUBCASE("equal estimates still fill every request") {
    BanditState tie = BanditState::make(3, 2);
    for (int i = 0; i < 3; ++i) {
      tie.estimates[i][0].add(2.0);
      tie.estimates[i][1].add(2.0);
    }
    std::vector<SsmProfile> two{{0, 1000.0, 2, 0.0}, {1, 500.0, 2, 0.0}};
    const std::vector<int> plan_tie = plan_exploitation(tie, {0, 1, 2}, two);
    for (int i = 0; i < 3; ++i) CHECK(plan_tie[i] != -1);
  }
}

TEST_CASE("cumulative regret on a pinned suboptimal arm") {
  const std::vector<std::vector<double>> g{{10.0, 5.0}};
  const std::vector<int> capacities{1, 1};
  std::vector<SlotRecord> history;
  for (int t = 0; t < 100; ++t) {
    SlotRecord rec;
    rec.slot = t;
    rec.request_id = 0;
    rec.ssm_id = 1;
    rec.accepted = 5;
    rec.bonus = 0;
    rec.wall_time_sec = 1.0;  // realized goodput exactly 5
    history.push_back(rec);
  }
  const RegretBreakdown regret = cumulative_regret(g, capacities, history, 1.0, 100);
  CHECK(regret.optimal_assignment == std::vector<int>{0});
  CHECK(regret.goodput_term == doctest::Approx(500.0).epsilon(1e-12));
  CHECK(regret.switching_term == 0.0);
  CHECK(regret.total == doctest::Approx(500.0).epsilon(1e-12));

  SUBCASE("lambda zero ignores switching") {
    history[0].switch_cost_sec = 123.0;
    const RegretBreakdown r0 = cumulative_regret(g, capacities, history, 0.0, 100);
    CHECK(r0.switching_term == doctest::Approx(123.0));
    CHECK(r0.total == doctest::Approx(r0.goodput_term).epsilon(1e-12));
  }
}

TEST_CASE("regret decomposes into its two terms") {
  const std::vector<std::vector<double>> g{{4.0, 2.0}, {1.0, 3.0}};
  const std::vector<int> capacities{1, 1};
  std::vector<SlotRecord> history;
  Rng rng(17);
  for (int t = 0; t < 50; ++t) {
    for (int i = 0; i < 2; ++i) {
      SlotRecord rec;
      rec.slot = t;
      rec.request_id = i;
      rec.ssm_id = static_cast<int>(rng.uniform_int(0, 1));
      rec.accepted = static_cast<int>(rng.uniform_int(0, 4));
      rec.wall_time_sec = 0.5 + rng.unit();
      rec.switch_cost_sec = rng.unit() * 0.01;
      history.push_back(rec);
    }
  }
  const double lambda = 2.5;
  const RegretBreakdown regret =
      cumulative_regret(g, capacities, history, lambda, 50);
  CHECK(std::abs(regret.total -
                 (regret.goodput_term + lambda * regret.switching_term)) <=
        1e-9);
}

TEST_CASE("a policy pinned to the optimum has near-zero expected regret") {
  WorkloadSpec spec = flat_spec(2, {0.7, 0.5}, {1, 1}, 1000);
  const std::vector<Request> requests = generate_workload(spec);
  const auto g = true_goodput_matrix(spec, requests);
  MatchingInstance instance{g, {1, 1}};
  const std::vector<int> x_star = solve_max_weight_matching(instance).assignment;

  const long long slots = 50;
  double optimal_sum = 0.0;
  for (int i = 0; i < 2; ++i) optimal_sum += g[i][x_star[i]];

  double total_regret = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    WorkloadSpec run_spec = spec;
    run_spec.seed = 2000 + seed;
    SlotEngine engine(run_spec, generate_workload(run_spec));
    std::vector<SlotRecord> history;
    const std::vector<int> no_prewarm(2, -1);
    for (long long t = 0; t < slots; ++t) {
      engine.run_slot(x_star, no_prewarm, false, &history);
    }
    const RegretBreakdown regret =
        cumulative_regret(g, {1, 1}, history, 1.0, slots);
    total_regret += regret.goodput_term;
  }
  const double mean_regret = total_regret / 100.0;
  CHECK(std::abs(mean_regret) <= 0.02 * slots * optimal_sum);
}

TEST_CASE("single-model lbss accrues no pseudo-regret or switching") {
  WorkloadSpec spec = flat_spec(4, {0.6}, {8}, 77);
  BanditConfig config;
  config.alpha = 4;
  config.beta = 2;
  config.max_slots = 60;
  const std::vector<Request> requests = generate_workload(spec);
  const auto g = true_goodput_matrix(spec, requests);
  LbssOptions options;
  options.ground_truth = &g;
  const PolicyRunResult run = run_lbss(config, spec, options);
  CHECK(run.ledger.switching_cost == 0.0);
  CHECK(run.ledger.goodput_regret == doctest::Approx(0.0));
  for (const SlotRecord& rec : run.history) CHECK(rec.ssm_id == 0);
}

TEST_CASE("lbss run matches the epoch schedule and capacities") {
  WorkloadSpec spec = flat_spec(6, {0.8, 0.5, 0.3}, {2, 2, 2}, 123);
  BanditConfig config;
  config.alpha = 8;
  config.beta = 2;
  config.max_slots = 200;
  const PolicyRunResult run = run_lbss(config, spec);

  REQUIRE(static_cast<long long>(run.slot_durations.size()) == 200);
  const auto by_slot = assignments_by_slot(run.history);
  for (const auto& [slot, assignments] : by_slot) {
    std::map<int, int> load;
    for (const auto& [request, ssm] : assignments) {
      if (ssm >= 0) ++load[ssm];
    }
    for (const auto& [ssm, count] : load) CHECK(count <= 2);
  }
  // The explore flag in the history must match the pure phase function.
  for (const SlotRecord& rec : run.history) {
    CHECK(rec.explore == phase_of_slot(config, rec.slot).explore);
  }
  // Chunk stability: during exploration, a request keeps its arm within a
  // chunk.
  for (const SlotRecord& rec : run.history) {
    if (!rec.explore) continue;
    const EpochPhase phase = phase_of_slot(config, rec.slot);
    (void)phase;
  }
  // Regret curve slots are epoch endpoints, increasing.
  for (std::size_t i = 1; i < run.regret_curve.size(); ++i) {
    CHECK(run.regret_curve[i].slot > run.regret_curve[i - 1].slot);
    CHECK(run.regret_curve[i].total >= run.regret_curve[i - 1].total - 1e-9);
  }
}

TEST_CASE("lbss pseudo-regret ledger is monotone with ground truth") {
  WorkloadSpec spec = flat_spec(4, {0.8, 0.4}, {2, 2}, 321);
  BanditConfig config;
  config.alpha = 8;
  config.beta = 2;
  config.max_slots = 150;
  const auto g = true_goodput_matrix(spec, generate_workload(spec));
  LbssOptions options;
  options.ground_truth = &g;
  const PolicyRunResult run = run_lbss(config, spec, options);
  CHECK(run.ledger.goodput_regret >= 0.0);
  CHECK(run.ledger.switching_cost >= 0.0);
}
