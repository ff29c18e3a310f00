#include "specsim/presets.hpp"

#include "specsim/errors.hpp"

namespace specsim {
namespace presets {

namespace {

SsmProfile ssm(int id, double tokens_per_sec, int capacity, double slowdown) {
  SsmProfile profile;
  profile.id = id;
  profile.tokens_per_sec = tokens_per_sec;
  profile.batch_capacity = capacity;
  profile.batch_slowdown = slowdown;
  return profile;
}

DifficultyClass difficulty(std::string name, double weight, int prompt_lo,
                           int prompt_hi, long long target_lo,
                           long long target_hi,
                           std::vector<std::pair<double, double>> accept) {
  DifficultyClass cls;
  cls.name = std::move(name);
  cls.weight = weight;
  cls.prompt_len_lo = prompt_lo;
  cls.prompt_len_hi = prompt_hi;
  cls.target_len_lo = target_lo;
  cls.target_len_hi = target_hi;
  cls.accept_range = std::move(accept);
  return cls;
}

constexpr long long kLongTarget = 1000000000;  // never finishes at desk scale

}  // namespace

ExperimentConfig hetero() {
  ExperimentConfig config;
  config.name = "hetero";
  config.workload.num_requests = 32;
  config.workload.window = 6;
  config.workload.seed = 42;
  config.workload.bonus_token = false;
  config.workload.ssm_profiles = {
      ssm(0, 1000.0, 8, 0.07), ssm(1, 800.0, 8, 0.07), ssm(2, 600.0, 8, 0.07),
      ssm(3, 450.0, 4, 0.07), ssm(4, 350.0, 4, 0.07)};
  config.workload.llm.fixed_overhead_sec = 0.02;
  config.workload.llm.per_token_sec = 0.0;
  // Difficulty anti-correlates with prompt length: terse requests are the
  // hard ones here, so length alone is a poor routing signal.
  config.workload.difficulty_mix = {
      difficulty("easy", 0.50, 200, 450, kLongTarget, kLongTarget,
                 {{0.88, 0.92}, {0.78, 0.82}, {0.53, 0.57}, {0.33, 0.37},
                  {0.18, 0.22}}),
      difficulty("medium", 0.25, 80, 200, kLongTarget, kLongTarget,
                 {{0.33, 0.37}, {0.68, 0.72}, {0.86, 0.90}, {0.68, 0.72},
                  {0.43, 0.47}}),
      difficulty("hard", 0.25, 30, 80, kLongTarget, kLongTarget,
                 {{0.01, 0.03}, {0.13, 0.17}, {0.43, 0.47}, {0.83, 0.87},
                  {0.88, 0.92}}),
  };
  config.bandit.alpha = 8;
  config.bandit.beta = 2;
  config.bandit.lambda = 1.0;
  config.bandit.max_slots = 2000;
  config.packer.decomposition = false;
  config.pipeline.mode = PipelineMode::Serial;
  config.pipeline.eval_slots = 200;
  config.policy = PolicyKind::Lbss;
  config.repetitions = 10;
  return config;
}

ExperimentConfig mix() {
  ExperimentConfig config;
  config.name = "mix";
  config.workload.num_requests = 32;
  config.workload.window = 8;
  config.workload.seed = 1234;
  config.workload.bonus_token = false;
  config.workload.ssm_profiles = {
      ssm(0, 900.0, 10, 0.07), ssm(1, 700.0, 10, 0.07), ssm(2, 550.0, 10, 0.07),
      ssm(3, 430.0, 6, 0.07), ssm(4, 350.0, 6, 0.07)};
  config.workload.llm.fixed_overhead_sec = 0.002;
  config.workload.llm.per_token_sec = 2.5e-6;
  config.workload.difficulty_mix = {
      difficulty("easy", 0.375, 200, 450, kLongTarget, kLongTarget,
                 {{0.90, 0.94}, {0.78, 0.82}, {0.53, 0.57}, {0.33, 0.37},
                  {0.18, 0.22}}),
      difficulty("medium", 0.3125, 80, 200, kLongTarget, kLongTarget,
                 {{0.33, 0.37}, {0.68, 0.72}, {0.86, 0.90}, {0.68, 0.72},
                  {0.43, 0.47}}),
      difficulty("hard", 0.3125, 30, 80, kLongTarget, kLongTarget,
                 {{0.01, 0.03}, {0.13, 0.17}, {0.43, 0.47}, {0.83, 0.87},
                  {0.88, 0.92}}),
  };
  config.bandit.alpha = 8;
  config.bandit.beta = 2;
  config.bandit.lambda = 1.0;
  config.bandit.max_slots = 600;
  config.packer.decomposition = true;
  config.pipeline.mode = PipelineMode::Tuned;
  config.pipeline.initial_micro_batches = 2;
  config.pipeline.eval_slots = 240;
  config.policy = PolicyKind::Lbss;
  config.repetitions = 10;
  return config;
}

ExperimentConfig fig9() {
  ExperimentConfig config;
  config.name = "fig9";
  config.workload.num_requests = 32;
  config.workload.window = 8;
  config.workload.seed = 77;
  config.workload.bonus_token = false;
  // Capacity skewed toward the slow models and near-linear batch cost, so
  // micro-batching has synchronization gaps worth reclaiming.
  config.workload.ssm_profiles = {
      ssm(0, 1800.0, 4, 1.0), ssm(1, 1400.0, 4, 1.0), ssm(2, 1000.0, 6, 1.0),
      ssm(3, 700.0, 9, 1.0), ssm(4, 500.0, 9, 1.0)};
  config.workload.llm.fixed_overhead_sec = 0.003;
  config.workload.llm.per_token_sec = 1.0e-5;
  config.workload.difficulty_mix = {
      difficulty("blend", 1.0, 60, 240, kLongTarget, kLongTarget,
                 {{0.28, 0.32}, {0.48, 0.52}, {0.63, 0.67}, {0.78, 0.82},
                  {0.88, 0.92}}),
  };
  config.bandit.alpha = 8;
  config.bandit.beta = 2;
  config.bandit.max_slots = 50;
  config.packer.decomposition = true;
  config.pipeline.mode = PipelineMode::Tuned;
  config.pipeline.initial_micro_batches = 2;
  config.pipeline.eval_slots = 200;
  config.policy = PolicyKind::Greedy;  // static fill; the sweep is the point
  config.repetitions = 10;
  return config;
}

ExperimentConfig by_name(const std::string& name) {
  if (name == "hetero") return hetero();
  if (name == "mix") return mix();
  if (name == "fig9") return fig9();
  throw ConfigError("unknown preset '" + name + "'");
}

std::vector<std::string> names() { return {"hetero", "mix", "fig9"}; }

}  // namespace presets
}  // namespace specsim
