// specsim - seeded desk-scale experiments for speculative decoding
// scheduling: learning-based model selection, padding-minimal batch
// packing, and micro-batched speculation/verification pipelining.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "specsim/attention.hpp"
#include "specsim/config.hpp"
#include "specsim/errors.hpp"
#include "specsim/experiment.hpp"
#include "specsim/packing.hpp"
#include "specsim/pipeline.hpp"
#include "specsim/presets.hpp"
#include "specsim/trace_io.hpp"

namespace {

using namespace specsim;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

struct CommonArgs {
  std::string config_path;
  std::string preset;
  std::string output_dir;
  long long seed = -1;

  ExperimentConfig resolve() const {
    ExperimentConfig config;
    if (!config_path.empty() && !preset.empty()) {
      throw ConfigError("use either --config or --preset, not both");
    }
    if (!config_path.empty()) {
      config = load_config(config_path);
    } else if (!preset.empty()) {
      config = presets::by_name(preset);
    } else {
      throw ConfigError("either --config or --preset is required");
    }
    if (seed >= 0) config.workload.seed = static_cast<std::uint64_t>(seed);
    if (!output_dir.empty()) config.output_dir = output_dir;
    return config;
  }
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path,
                  "experiment config file (structured text)");
  cmd->add_option("--preset", args->preset,
                  "built-in scenario: hetero, mix, or fig9");
  cmd->add_option("--out", args->output_dir, "output directory");
  cmd->add_option("--seed", args->seed, "override the workload seed");
}

std::filesystem::path out_path(const ExperimentConfig& config,
                               const std::string& file) {
  return std::filesystem::path(config.output_dir) / file;
}

int cmd_run(const CommonArgs& common, bool emit_history_files,
            bool emit_trace_files, bool print_config) {
  const ExperimentConfig config = common.resolve();
  if (print_config) {
    std::cout << config_toml(config);
    return kExitOk;
  }
  const MetricsReport report = run_experiment(config);
  write_report(report, out_path(config, "report.json").string());
  std::cout << "policy goodput: " << report.policy_goodput.mean << " +- "
            << report.policy_goodput.stddev << " tokens/s over "
            << report.runs.size() << " run(s)\n";
  std::cout << "eval goodput:   " << report.eval_goodput.mean << " +- "
            << report.eval_goodput.stddev << " tokens/s ("
            << to_string(config.pipeline.mode) << ")\n";
  std::cout << "report: " << out_path(config, "report.json").string() << "\n";

  if (emit_history_files || emit_trace_files) {
    const SingleRun first = run_single(config, config.workload.seed);
    if (emit_history_files) {
      const auto path = out_path(config, "history.csv");
      emit_history(first.run.history, path.string());
      std::cout << "history: " << path.string() << "\n";
    }
    if (emit_trace_files) {
      const EventTrace& trace = first.eval_trace.empty() ? first.serial_trace
                                                         : first.eval_trace;
      const auto csv_path = out_path(config, "trace.csv");
      const auto json_path = out_path(config, "trace.json");
      emit_trace(trace, csv_path.string(), TraceFormat::Csv);
      emit_trace(trace, json_path.string(), TraceFormat::Json);
      std::cout << "trace: " << csv_path.string() << ", " << json_path.string()
                << "\n";
    }
  }
  return kExitOk;
}

int cmd_compare(const CommonArgs& common, std::vector<std::string> policies) {
  const ExperimentConfig base = common.resolve();
  if (policies.empty()) {
    policies = {"lbss", "egreedy", "greedy"};
  }
  std::vector<ExperimentConfig> configs;
  for (const std::string& policy : policies) {
    ExperimentConfig config = base;
    config.name = policy;
    if (policy == "lbss") {
      config.policy = PolicyKind::Lbss;
    } else if (policy == "egreedy") {
      config.policy = PolicyKind::EpsilonGreedy;
    } else if (policy == "greedy") {
      config.policy = PolicyKind::Greedy;
    } else if (policy.rfind("vanilla", 0) == 0) {
      config.policy = PolicyKind::Vanilla;
      if (policy.size() > 7 && policy[7] == ':') {
        config.vanilla_ssm = std::stoi(policy.substr(8));
      }
    } else {
      throw ConfigError("unknown policy '" + policy + "'");
    }
    configs.push_back(std::move(config));
  }
  const ComparisonTable table = compare_policies(configs);
  std::cout << render_comparison(table);
  write_file_atomic(out_path(base, "comparison.json").string(),
                    comparison_json(table));
  std::cout << "comparison: " << out_path(base, "comparison.json").string()
            << "\n";
  return kExitOk;
}

int cmd_sweep(const CommonArgs& common, int max_b) {
  const ExperimentConfig config = common.resolve();
  const SweepResult sweep = sweep_microbatch(config, max_b);
  std::cout << sweep_csv(sweep);
  std::cout << "tuned plan:";
  for (int b : sweep.tuned_plan) std::cout << ' ' << b;
  std::cout << " (" << sweep.tuned_tokens_per_sec << " tokens/s)\n";
  write_file_atomic(out_path(config, "sweep.csv").string(), sweep_csv(sweep));
  return kExitOk;
}

int cmd_pack_demo(std::vector<int> lens, int width, bool check_attention) {
  if (lens.empty()) {
    throw ConfigError("pack-demo: --lens requires at least one length");
  }
  const PackedLayout layout = pack(lens, width);
  const IndicatorMask mask = build_indicator(layout);
  std::cout << "lengths:";
  for (int len : lens) std::cout << ' ' << len;
  std::cout << "\nlayout: " << layout.width << " rows x " << layout.length
            << " cols\n";
  std::cout << "padding: " << layout.padding_tokens << " tokens (aligned layout: "
            << naive_padding(lens) << ")\n";
  for (int r = 0; r < mask.width; ++r) {
    std::cout << "row " << r << ": ";
    for (int c = 0; c < mask.length; ++c) {
      const int cell = mask.at(r, c);
      if (cell == kEmptyCell) {
        std::cout << '.';
      } else {
        std::cout << static_cast<char>('A' + cell % 26);
      }
    }
    std::cout << '\n';
  }
  std::cout << "query replica rows:";
  for (int q : layout.q_replica_rows) std::cout << ' ' << q;
  std::cout << '\n';

  if (check_attention) {
    std::vector<ToyAttentionInput> inputs;
    for (std::size_t i = 0; i < lens.size(); ++i) {
      inputs.push_back(make_toy_input(1000 + i, 3, lens[i], 4));
    }
    double worst = 0.0;
    const auto outputs = decomposed_attention(inputs, layout, mask);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const Matrix expect =
          reference_attention(inputs[i].q, inputs[i].k, inputs[i].v);
      for (std::size_t k = 0; k < expect.data.size(); ++k) {
        worst = std::max(worst, std::abs(expect.data[k] - outputs[i].data[k]));
      }
    }
    std::cout << "attention check: max |packed - reference| = " << worst
              << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "specsim: speculative decoding scheduling experiments "
      "(model selection, batch packing, pipelining)"};
  app.require_subcommand(1);

  CommonArgs run_args;
  bool run_history = false, run_trace = false, run_print = false;
  CLI::App* run = app.add_subcommand("run", "run one experiment config");
  add_common(run, &run_args);
  run->add_flag("--emit-history", run_history,
                "also write the first repetition's per-slot history");
  run->add_flag("--emit-trace", run_trace,
                "also write the first repetition's event trace");
  run->add_flag("--print-config", run_print,
                "print the resolved config and exit");

  CommonArgs compare_args;
  std::vector<std::string> compare_policies_arg;
  CLI::App* compare =
      app.add_subcommand("compare", "compare selection policies");
  add_common(compare, &compare_args);
  compare->add_option("--policies", compare_policies_arg,
                      "policies to compare (lbss, egreedy, greedy, vanilla:K)")
      ->delimiter(',');

  CommonArgs sweep_args;
  int sweep_max_b = 8;
  CLI::App* sweep = app.add_subcommand(
      "sweep-microbatch", "throughput for each micro-batch count");
  add_common(sweep, &sweep_args);
  sweep->add_option("--max-b", sweep_max_b, "largest micro-batch count");

  std::vector<int> demo_lens;
  int demo_width = 0;
  bool demo_attention = false;
  CLI::App* demo =
      app.add_subcommand("pack-demo", "print the packed layout of a batch");
  demo->add_option("--lens", demo_lens, "per-request KV lengths")
      ->delimiter(',')
      ->required();
  demo->add_option("--width", demo_width, "tensor width (rows)")->required();
  demo->add_flag("--check-attention", demo_attention,
                 "numerically compare packed and reference attention");

  try {
    app.parse(argc, argv);
    if (run->parsed()) {
      return cmd_run(run_args, run_history, run_trace, run_print);
    }
    if (compare->parsed()) {
      return cmd_compare(compare_args, compare_policies_arg);
    }
    if (sweep->parsed()) {
      return cmd_sweep(sweep_args, sweep_max_b);
    }
    if (demo->parsed()) {
      return cmd_pack_demo(demo_lens, demo_width, demo_attention);
    }
    return kExitFailure;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
