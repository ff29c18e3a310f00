#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specsim/bandit.hpp"
#include "specsim/model.hpp"
#include "specsim/pipeline.hpp"

namespace specsim {

enum class PolicyKind { Lbss, EpsilonGreedy, Greedy, Vanilla };
enum class PipelineMode { Serial, Pipelined, Tuned };

std::string to_string(PolicyKind kind);
std::string to_string(PipelineMode mode);

struct PackerConfig {
  bool decomposition = false;  // request decomposition on the KV layout
  int width = 0;               // 0: verification batch size
};

struct PipelineConfig {
  PipelineMode mode = PipelineMode::Serial;
  int initial_micro_batches = 2;
  double degradation_threshold = 0.05;
  long long probe_slots = 20;
  int max_micro_batches = 8;
  long long eval_slots = 200;
};

struct ExperimentConfig {
  std::string name = "experiment";
  WorkloadSpec workload;
  BanditConfig bandit;
  PackerConfig packer;
  PipelineConfig pipeline;
  PolicyKind policy = PolicyKind::Lbss;
  double epsilon = 0.2;  // paper-style: probability of the exploit step
  int vanilla_ssm = 0;
  int repetitions = 1;
  std::string output_dir = "out";
};

void validate(const ExperimentConfig& config);

// Simulator-only ground truth: expected goodput of request i on model j
// under the reference conditions (batch at capacity, verification charged
// at the initial combined batch). Exact for per_token_sec = 0.
std::vector<std::vector<double>> true_goodput_matrix(
    const WorkloadSpec& spec, const std::vector<Request>& requests);

struct RunRecord {
  std::uint64_t seed = 0;
  double policy_goodput = 0.0;  // whole learning run
  double eval_goodput = 0.0;    // post-run eval window, configured mode
  double eval_idle_fraction = 0.0;
  double serial_goodput = 0.0;  // same eval window, serial schedule
  double serial_idle_fraction = 0.0;
  double accepted_tokens = 0.0;
  double policy_time_sec = 0.0;
  long long padding_tokens = 0;
  double verify_time_sec = 0.0;
  double regret_total = 0.0;
  double regret_goodput_term = 0.0;
  double regret_switching_term = 0.0;
  std::vector<RegretPoint> regret_curve;   // per-epoch pseudo-regret (LBSS)
  std::vector<int> eval_micro_batches;     // plan used by the eval window
};

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;
};
Aggregate aggregate(const std::vector<double>& values);

struct MetricsReport {
  std::string name;
  std::string policy;
  std::vector<RunRecord> runs;
  Aggregate policy_goodput;
  Aggregate eval_goodput;
  Aggregate eval_idle_fraction;
  Aggregate regret_total;
  Aggregate padding_tokens;
};

// One seeded repetition with its raw artifacts kept around.
struct SingleRun {
  RunRecord record;
  PolicyRunResult run;
  EventTrace serial_trace;  // eval window, serial schedule
  EventTrace eval_trace;    // eval window, configured schedule
};
SingleRun run_single(const ExperimentConfig& config, std::uint64_t seed);

// Runs `repetitions` seeded repetitions (seed, seed+1, ...) of the
// configured policy, evaluates the converged assignment through the
// pipeline simulator, and aggregates.
MetricsReport run_experiment(const ExperimentConfig& config);

std::string report_json(const MetricsReport& report);
void write_report(const MetricsReport& report, const std::string& path);

// Side-by-side policies over one shared workload.
struct PolicyComparison {
  std::string name;
  Aggregate goodput;
  Aggregate regret;
};
struct ComparisonTable {
  std::vector<PolicyComparison> rows;
};
ComparisonTable compare_policies(const std::vector<ExperimentConfig>& configs);
std::string comparison_json(const ComparisonTable& table);
std::string render_comparison(const ComparisonTable& table);

// Throughput and idle share of the first repetition's converged
// assignment for every uniform micro-batch count in [1, max_b].
struct SweepPoint {
  int micro_batches = 1;
  double tokens_per_sec = 0.0;
  double idle_fraction = 0.0;
};
struct SweepResult {
  std::vector<SweepPoint> points;
  std::vector<int> tuned_plan;
  double tuned_tokens_per_sec = 0.0;
};
SweepResult sweep_microbatch(const ExperimentConfig& config, int max_b);
std::string sweep_csv(const SweepResult& sweep);

// The eval-window scenario behind run_experiment, exposed for the sweep
// and the acceptance suite.
PipelineScenario eval_scenario(const ExperimentConfig& config,
                               const PolicyRunResult& run,
                               std::uint64_t seed);

}  // namespace specsim
