#include "specsim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "specsim/errors.hpp"
#include "specsim/policies.hpp"
#include "specsim/trace_io.hpp"

namespace specsim {

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Lbss:
      return "lbss";
    case PolicyKind::EpsilonGreedy:
      return "egreedy";
    case PolicyKind::Greedy:
      return "greedy";
    case PolicyKind::Vanilla:
      return "vanilla";
  }
  return "unknown";
}

std::string to_string(PipelineMode mode) {
  switch (mode) {
    case PipelineMode::Serial:
      return "serial";
    case PipelineMode::Pipelined:
      return "pipelined";
    case PipelineMode::Tuned:
      return "tuned";
  }
  return "unknown";
}

void validate(const ExperimentConfig& config) {
  validate(config.workload);
  validate(config.bandit);
  if (config.packer.width < 0) {
    throw ConfigError("packer.width must be non-negative");
  }
  if (config.pipeline.initial_micro_batches < 1) {
    throw ConfigError("pipeline.initial_micro_batches must be at least 1");
  }
  if (config.pipeline.max_micro_batches < 1) {
    throw ConfigError("pipeline.max_micro_batches must be at least 1");
  }
  if (!(config.pipeline.degradation_threshold >= 0.0 &&
        config.pipeline.degradation_threshold < 1.0)) {
    throw ConfigError("pipeline.degradation_threshold must be in [0, 1)");
  }
  if (config.pipeline.probe_slots < 1) {
    throw ConfigError("pipeline.probe_slots must be at least 1");
  }
  if (config.pipeline.eval_slots < 0) {
    throw ConfigError("pipeline.eval_slots must be non-negative");
  }
  if (!(config.epsilon >= 0.0 && config.epsilon <= 1.0)) {
    throw ConfigError("experiment.epsilon must be in [0, 1]");
  }
  if (config.vanilla_ssm < 0 ||
      static_cast<std::size_t>(config.vanilla_ssm) >=
          config.workload.ssm_profiles.size()) {
    throw ConfigError("experiment.vanilla_ssm out of range");
  }
  if (config.repetitions < 1) {
    throw ConfigError("experiment.repetitions must be at least 1");
  }
}

std::vector<std::vector<double>> true_goodput_matrix(
    const WorkloadSpec& spec, const std::vector<Request>& requests) {
  // Reference verification charge: the initial combined batch of every
  // admitted request (capacity-bound), without packing. Exact whenever
  // per_token_sec is zero, an approximation otherwise.
  std::vector<int> kv_lens;
  const int capacity = spec.total_capacity();
  for (const Request& r : requests) {
    if (static_cast<int>(kv_lens.size()) >= capacity) break;
    kv_lens.push_back(static_cast<int>(r.kv_len(spec.window)));
  }
  double verify_ref = spec.llm.fixed_overhead_sec;
  if (!kv_lens.empty()) {
    const VerifyBatchCost cost =
        verify_batch_cost(kv_lens, spec.window, /*packing=*/false, 0);
    verify_ref = verification_time(spec.llm, cost.tokens);
  }

  std::vector<std::vector<double>> g(requests.size());
  const double bonus = spec.bonus_token ? 1.0 : 0.0;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    g[i].resize(spec.ssm_profiles.size());
    for (std::size_t j = 0; j < spec.ssm_profiles.size(); ++j) {
      const SsmProfile& ssm = spec.ssm_profiles[j];
      const double wall =
          speculation_time(ssm, ssm.batch_capacity, spec.window) + verify_ref;
      g[i][j] =
          (expected_accepted_prefix(requests[i].accept_prob[j], spec.window) +
           bonus) /
          wall;
    }
  }
  return g;
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate agg;
  if (values.empty()) return agg;
  double sum = 0.0;
  for (double v : values) sum += v;
  agg.mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - agg.mean) * (v - agg.mean);
  agg.stddev = std::sqrt(var / static_cast<double>(values.size()));
  return agg;
}

namespace {

struct PolicyOutput {
  PolicyRunResult run;
  WorkloadSpec effective_spec;  // homogenized for vanilla
  std::vector<std::vector<double>> ground_truth;
};

PolicyOutput dispatch_policy(const ExperimentConfig& config,
                             std::uint64_t seed) {
  WorkloadSpec spec = config.workload;
  spec.seed = seed;
  EngineOptions engine;
  engine.packing = config.packer.decomposition;
  engine.pack_width = config.packer.width;

  PolicyOutput out;
  out.effective_spec = spec;
  switch (config.policy) {
    case PolicyKind::Lbss: {
      out.ground_truth = true_goodput_matrix(spec, generate_workload(spec));
      LbssOptions options;
      options.engine = engine;
      options.ground_truth = &out.ground_truth;
      out.run = run_lbss(config.bandit, spec, options);
      break;
    }
    case PolicyKind::EpsilonGreedy:
      out.ground_truth = true_goodput_matrix(spec, generate_workload(spec));
      out.run = run_epsilon_greedy(config.epsilon, spec,
                                   config.bandit.max_slots, engine);
      break;
    case PolicyKind::Greedy:
      out.ground_truth = true_goodput_matrix(spec, generate_workload(spec));
      out.run = run_greedy(spec, config.bandit.max_slots, engine);
      break;
    case PolicyKind::Vanilla: {
      out.effective_spec = homogeneous_spec(spec, config.vanilla_ssm);
      out.ground_truth = true_goodput_matrix(
          out.effective_spec,
          homogenize_requests(generate_workload(spec), config.vanilla_ssm));
      out.run =
          run_vanilla(config.vanilla_ssm, spec, config.bandit.max_slots, engine);
      break;
    }
  }
  return out;
}

nlohmann::ordered_json regret_curve_json(const std::vector<RegretPoint>& curve) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const RegretPoint& p : curve) {
    arr.push_back({{"slot", p.slot},
                   {"epoch", p.epoch},
                   {"goodput_regret", p.goodput_regret},
                   {"switching_cost", p.switching_cost},
                   {"total", p.total}});
  }
  return arr;
}

}  // namespace

PipelineScenario eval_scenario(const ExperimentConfig& config,
                               const PolicyRunResult& run,
                               std::uint64_t seed) {
  WorkloadSpec spec = config.workload;
  spec.seed = seed;
  if (config.policy == PolicyKind::Vanilla) {
    spec = homogeneous_spec(spec, config.vanilla_ssm);
  }
  PipelineScenario scenario;
  scenario.requests = run.requests;
  scenario.ssm_profiles = spec.ssm_profiles;
  scenario.llm = spec.llm;
  scenario.window = spec.window;
  scenario.bonus_token = spec.bonus_token;
  scenario.seed = seed;
  scenario.assignment = run.final_assignment;
  scenario.assignment.resize(run.requests.size(), -1);
  scenario.options.packing = config.packer.decomposition;
  scenario.options.pack_width = config.packer.width;
  scenario.options.base_slot =
      static_cast<long long>(run.slot_durations.size());
  return scenario;
}

SingleRun run_single(const ExperimentConfig& config, std::uint64_t seed) {
  PolicyOutput out = dispatch_policy(config, seed);

  SingleRun single;
  RunRecord& record = single.record;
  record.seed = seed;
  record.policy_goodput = out.run.goodput();
  record.accepted_tokens = out.run.accepted_tokens;
  record.policy_time_sec = out.run.total_time_sec;
  record.padding_tokens = out.run.padding_tokens;
  record.verify_time_sec = out.run.verify_time_sec;
  record.regret_curve = out.run.regret_curve;

  std::vector<int> capacities;
  for (const auto& s : out.effective_spec.ssm_profiles) {
    capacities.push_back(s.batch_capacity);
  }
  const RegretBreakdown regret = cumulative_regret(
      out.ground_truth, capacities, out.run.history, config.bandit.lambda,
      static_cast<long long>(out.run.slot_durations.size()));
  record.regret_total = regret.total;
  record.regret_goodput_term = regret.goodput_term;
  record.regret_switching_term = regret.switching_term;

  if (config.pipeline.eval_slots > 0) {
    const PipelineScenario scenario = eval_scenario(config, out.run, seed);
    single.serial_trace = simulate_serial(scenario, config.pipeline.eval_slots);
    if (!single.serial_trace.empty()) {
      const ThroughputStats stats = throughput(single.serial_trace);
      record.serial_goodput = stats.tokens_per_sec;
      record.serial_idle_fraction = stats.idle_fraction;
    }
    switch (config.pipeline.mode) {
      case PipelineMode::Serial:
        single.eval_trace = single.serial_trace;
        record.eval_micro_batches.assign(scenario.ssm_profiles.size(), 1);
        break;
      case PipelineMode::Pipelined: {
        std::vector<int> batch_sizes(scenario.ssm_profiles.size(), 0);
        for (std::size_t i = 0; i < scenario.assignment.size(); ++i) {
          if (scenario.assignment[i] >= 0 &&
              scenario.requests[i].state != RequestState::Finished) {
            ++batch_sizes[scenario.assignment[i]];
          }
        }
        const MicroBatchPlan plan =
            uniform_plan(batch_sizes, config.pipeline.initial_micro_batches);
        record.eval_micro_batches = plan.per_ssm;
        single.eval_trace =
            simulate_pipelined(scenario, plan, config.pipeline.eval_slots);
        break;
      }
      case PipelineMode::Tuned: {
        TuneConfig tune;
        tune.initial_micro_batches = config.pipeline.initial_micro_batches;
        tune.degradation_threshold = config.pipeline.degradation_threshold;
        tune.probe_slots = config.pipeline.probe_slots;
        tune.max_micro_batches = config.pipeline.max_micro_batches;
        const MicroBatchPlan plan = tune_micro_batches(scenario, tune);
        record.eval_micro_batches = plan.per_ssm;
        single.eval_trace =
            simulate_pipelined(scenario, plan, config.pipeline.eval_slots);
        break;
      }
    }
    if (!single.eval_trace.empty()) {
      const ThroughputStats stats = throughput(single.eval_trace);
      record.eval_goodput = stats.tokens_per_sec;
      record.eval_idle_fraction = stats.idle_fraction;
    }
  }
  single.run = std::move(out.run);
  return single;
}

MetricsReport run_experiment(const ExperimentConfig& config) {
  validate(config);
  MetricsReport report;
  report.name = config.name;
  report.policy = to_string(config.policy);

  for (int rep = 0; rep < config.repetitions; ++rep) {
    const std::uint64_t seed = config.workload.seed + rep;
    report.runs.push_back(run_single(config, seed).record);
  }

  std::vector<double> policy_goodputs, eval_goodputs, idles, regrets, paddings;
  for (const RunRecord& r : report.runs) {
    policy_goodputs.push_back(r.policy_goodput);
    eval_goodputs.push_back(r.eval_goodput);
    idles.push_back(r.eval_idle_fraction);
    regrets.push_back(r.regret_total);
    paddings.push_back(static_cast<double>(r.padding_tokens));
  }
  report.policy_goodput = aggregate(policy_goodputs);
  report.eval_goodput = aggregate(eval_goodputs);
  report.eval_idle_fraction = aggregate(idles);
  report.regret_total = aggregate(regrets);
  report.padding_tokens = aggregate(paddings);
  return report;
}

std::string report_json(const MetricsReport& report) {
  nlohmann::ordered_json doc;
  doc["name"] = report.name;
  doc["policy"] = report.policy;
  doc["aggregates"] = {
      {"policy_goodput",
       {{"mean", report.policy_goodput.mean},
        {"stddev", report.policy_goodput.stddev}}},
      {"eval_goodput",
       {{"mean", report.eval_goodput.mean},
        {"stddev", report.eval_goodput.stddev}}},
      {"eval_idle_fraction",
       {{"mean", report.eval_idle_fraction.mean},
        {"stddev", report.eval_idle_fraction.stddev}}},
      {"regret_total",
       {{"mean", report.regret_total.mean},
        {"stddev", report.regret_total.stddev}}},
      {"padding_tokens",
       {{"mean", report.padding_tokens.mean},
        {"stddev", report.padding_tokens.stddev}}},
  };
  doc["runs"] = nlohmann::ordered_json::array();
  for (const RunRecord& r : report.runs) {
    nlohmann::ordered_json run;
    run["seed"] = r.seed;
    run["policy_goodput"] = r.policy_goodput;
    run["eval_goodput"] = r.eval_goodput;
    run["eval_idle_fraction"] = r.eval_idle_fraction;
    run["serial_goodput"] = r.serial_goodput;
    run["serial_idle_fraction"] = r.serial_idle_fraction;
    run["accepted_tokens"] = r.accepted_tokens;
    run["policy_time_sec"] = r.policy_time_sec;
    run["padding_tokens"] = r.padding_tokens;
    run["verify_time_sec"] = r.verify_time_sec;
    run["regret_total"] = r.regret_total;
    run["regret_goodput_term"] = r.regret_goodput_term;
    run["regret_switching_term"] = r.regret_switching_term;
    run["eval_micro_batches"] = r.eval_micro_batches;
    run["regret_curve"] = regret_curve_json(r.regret_curve);
    doc["runs"].push_back(std::move(run));
  }
  return doc.dump(2) + "\n";
}

void write_report(const MetricsReport& report, const std::string& path) {
  write_file_atomic(path, report_json(report));
}

ComparisonTable compare_policies(const std::vector<ExperimentConfig>& configs) {
  if (configs.size() < 2) {
    throw ConfigError("compare: need at least two configs");
  }
  // All configs must share one workload; the policy is what varies.
  auto workload_key = [](const ExperimentConfig& c) {
    return std::tuple{c.workload.num_requests, c.workload.window,
                      c.workload.seed, c.workload.bonus_token,
                      c.workload.ssm_profiles.size(),
                      c.workload.difficulty_mix.size(),
                      c.workload.llm.fixed_overhead_sec,
                      c.workload.llm.per_token_sec};
  };
  const auto reference = workload_key(configs.front());
  for (const ExperimentConfig& c : configs) {
    if (workload_key(c) != reference) {
      throw ConfigError("compare: configs do not share a workload");
    }
  }

  ComparisonTable table;
  for (const ExperimentConfig& c : configs) {
    const MetricsReport report = run_experiment(c);
    PolicyComparison row;
    row.name = c.name.empty() ? report.policy : c.name;
    row.goodput = report.policy_goodput;
    row.regret = report.regret_total;
    table.rows.push_back(row);
  }
  return table;
}

std::string comparison_json(const ComparisonTable& table) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const PolicyComparison& row : table.rows) {
    doc.push_back({{"policy", row.name},
                   {"goodput_mean", row.goodput.mean},
                   {"goodput_stddev", row.goodput.stddev},
                   {"regret_mean", row.regret.mean},
                   {"regret_stddev", row.regret.stddev}});
  }
  return doc.dump(2) + "\n";
}

std::string render_comparison(const ComparisonTable& table) {
  std::ostringstream out;
  out << std::left << std::setw(20) << "policy" << std::right << std::setw(14)
      << "goodput" << std::setw(12) << "+-" << std::setw(16) << "regret"
      << std::setw(12) << "+-" << '\n';
  for (const PolicyComparison& row : table.rows) {
    out << std::left << std::setw(20) << row.name << std::right << std::fixed
        << std::setprecision(3) << std::setw(14) << row.goodput.mean
        << std::setw(12) << row.goodput.stddev << std::setw(16)
        << row.regret.mean << std::setw(12) << row.regret.stddev << '\n';
  }
  return out.str();
}

SweepResult sweep_microbatch(const ExperimentConfig& config, int max_b) {
  if (max_b < 1) throw ConfigError("sweep: max micro-batch count must be >= 1");
  PolicyOutput out = dispatch_policy(config, config.workload.seed);
  const PipelineScenario scenario =
      eval_scenario(config, out.run, config.workload.seed);

  std::vector<int> batch_sizes(scenario.ssm_profiles.size(), 0);
  for (std::size_t i = 0; i < scenario.assignment.size(); ++i) {
    if (scenario.assignment[i] >= 0 &&
        scenario.requests[i].state != RequestState::Finished) {
      ++batch_sizes[scenario.assignment[i]];
    }
  }

  SweepResult sweep;
  for (int b = 1; b <= max_b; ++b) {
    const EventTrace trace = simulate_pipelined(
        scenario, uniform_plan(batch_sizes, b), config.pipeline.eval_slots);
    SweepPoint point;
    point.micro_batches = b;
    if (!trace.empty()) {
      const ThroughputStats stats = throughput(trace);
      point.tokens_per_sec = stats.tokens_per_sec;
      point.idle_fraction = stats.idle_fraction;
    }
    sweep.points.push_back(point);
  }

  TuneConfig tune;
  tune.initial_micro_batches = config.pipeline.initial_micro_batches;
  tune.degradation_threshold = config.pipeline.degradation_threshold;
  tune.probe_slots = config.pipeline.probe_slots;
  tune.max_micro_batches = config.pipeline.max_micro_batches;
  const MicroBatchPlan plan = tune_micro_batches(scenario, tune);
  sweep.tuned_plan = plan.per_ssm;
  const EventTrace tuned_trace =
      simulate_pipelined(scenario, plan, config.pipeline.eval_slots);
  if (!tuned_trace.empty()) {
    sweep.tuned_tokens_per_sec = throughput(tuned_trace).tokens_per_sec;
  }
  return sweep;
}

std::string sweep_csv(const SweepResult& sweep) {
  std::ostringstream out;
  out << "micro_batches,tokens_per_sec,idle_fraction\n";
  for (const SweepPoint& p : sweep.points) {
    out << p.micro_batches << ',' << p.tokens_per_sec << ',' << p.idle_fraction
        << '\n';
  }
  return out.str();
}

}  // namespace specsim
