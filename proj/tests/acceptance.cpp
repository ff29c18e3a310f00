// Acceptance suite: one pass/fail line per criterion, exit code equals the
// number of failures. Tolerances and thresholds are pinned in code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <specsim/attention.hpp>
#include <specsim/bandit.hpp>
#include <specsim/config.hpp>
#include <specsim/experiment.hpp>
#include <specsim/matching.hpp>
#include <specsim/model.hpp>
#include <specsim/packing.hpp>
#include <specsim/pipeline.hpp>
#include <specsim/presets.hpp>
#include <specsim/rng.hpp>
#include <specsim/trace_io.hpp>

using namespace specsim;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 1.0;
};

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  LinearFit fit;
  const double denom = n * sxx - sx * sx;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double mean_y = sy / n;
  for (std::size_t i = 0; i < n; ++i) {
    const double pred = fit.slope * x[i] + fit.intercept;
    ss_res += (y[i] - pred) * (y[i] - pred);
    ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
  }
  fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

double gaussian(Rng& rng) {
  // Box-Muller; the 1 - u guard keeps the log argument positive.
  const double u = 1.0 - rng.unit();
  const double v = rng.unit();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586 * v);
}

// ---------------------------------------------------------------------------
// 1. Attention exactness on randomized packed batches.
bool attention_exactness() {
  const auto start = Clock::now();
  Rng rng(20240001);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 6));
    std::vector<ToyAttentionInput> inputs;
    std::vector<int> lens;
    for (int i = 0; i < n; ++i) {
      const int kv_len = static_cast<int>(rng.uniform_int(1, 12));
      const int queries = static_cast<int>(rng.uniform_int(1, 4));
      inputs.push_back(make_toy_input(rng.next(), queries, kv_len, 4));
      lens.push_back(kv_len);
    }
    const int width = static_cast<int>(rng.uniform_int(1, n));
    const PackedLayout layout = pack(lens, width);
    const IndicatorMask mask = build_indicator(layout);
    const auto outputs = decomposed_attention(inputs, layout, mask);
    for (int i = 0; i < n; ++i) {
      const Matrix expect =
          reference_attention(inputs[i].q, inputs[i].k, inputs[i].v);
      for (std::size_t k = 0; k < expect.data.size(); ++k) {
        worst = std::max(worst, std::abs(expect.data[k] - outputs[i].data[k]));
      }
    }
  }
  const double elapsed = seconds_since(start);
  std::printf("    max |packed - reference| = %.3g, %.2fs\n", worst, elapsed);
  return worst <= 1e-9 && elapsed < 10.0;
}

// ---------------------------------------------------------------------------
// 2. Matching optimality against the exhaustive oracle.
bool matching_optimality() {
  const auto start = Clock::now();
  Rng rng(20240002);
  for (int trial = 0; trial < 1000; ++trial) {
    MatchingInstance inst;
    const int n = static_cast<int>(rng.uniform_int(1, 6));
    const int m = static_cast<int>(rng.uniform_int(1, 4));
    inst.capacities.assign(m, 1);
    int spare = 8 - m;
    for (int j = 0; j < m && spare > 0; ++j) {
      const int extra = static_cast<int>(rng.uniform_int(0, spare));
      inst.capacities[j] += extra;
      spare -= extra;
    }
    inst.weights.assign(n, std::vector<double>(m));
    for (auto& row : inst.weights) {
      // Dyadic weights make the comparison an exact tie, not an approx one.
      for (double& w : row) w = rng.uniform_int(0, 512) / 64.0;
    }
    const MatchResult km = solve_max_weight_matching(inst);
    const MatchResult oracle = brute_force_matching(inst);
    if (km.total_weight != oracle.total_weight) {
      std::printf("    mismatch at trial %d: %.17g vs %.17g\n", trial,
                  km.total_weight, oracle.total_weight);
      return false;
    }
  }
  const double elapsed = seconds_since(start);
  std::printf("    1000 instances tie exactly, %.2fs\n", elapsed);
  return elapsed < 5.0;
}

// ---------------------------------------------------------------------------
// 3. Packing quality: exhaustive minimum at small scale plus a padding cut
//    of at least 30% median on skewed batches.
long long stream_min_padding(const std::vector<int>& lens, int width) {
  const int rows = std::min<int>(width, static_cast<int>(lens.size()));
  long long total = 0;
  for (int len : lens) total += len;
  for (long long length = (total + rows - 1) / rows;; ++length) {
    if (rows * length >= total) return rows * length - total;
  }
}

bool packing_quality() {
  // Every multiset of up to 5 lengths in [1, 10], widths 1..3.
  std::vector<int> lens;
  std::function<bool(int, int)> enumerate = [&](int count, int min_len) {
    if (count > 0) {
      for (int width = 1; width <= 3; ++width) {
        const PackedLayout layout = pack(lens, width);
        if (layout.padding_tokens != stream_min_padding(lens, width)) {
          std::printf("    suboptimal pack at width %d\n", width);
          return false;
        }
      }
    }
    if (count == 5) return true;
    for (int len = min_len; len <= 10; ++len) {
      lens.push_back(len);
      if (!enumerate(count + 1, len)) return false;
      lens.pop_back();
    }
    return true;
  };
  if (!enumerate(0, 1)) return false;

  Rng rng(20240003);
  std::vector<double> reductions;
  for (int batch = 0; batch < 200; ++batch) {
    std::vector<int> skewed(16);
    for (int& len : skewed) {
      const double draw = std::exp(4.0 + 0.8 * gaussian(rng));
      len = std::max(1, std::min(1200, static_cast<int>(draw)));
    }
    const long long naive = naive_padding(skewed);
    if (naive == 0) {
      reductions.push_back(0.0);
      continue;
    }
    const PackedLayout layout = pack(skewed, 16);
    reductions.push_back(1.0 -
                         static_cast<double>(layout.padding_tokens) / naive);
  }
  std::sort(reductions.begin(), reductions.end());
  const double median = reductions[reductions.size() / 2];
  std::printf("    median padding reduction on skewed batches: %.1f%%\n",
              100.0 * median);
  return median >= 0.30;
}

// ---------------------------------------------------------------------------
// 4. Regret sublinearity on the stationary heterogeneous preset.
std::vector<double> pseudo_regret_per_slot(
    const std::vector<SlotRecord>& history,
    const std::vector<std::vector<double>>& g, const std::vector<int>& x_star,
    double lambda, long long total_slots) {
  std::vector<double> totals(total_slots, 0.0);
  for (const SlotRecord& rec : history) {
    const double best =
        x_star[rec.request_id] >= 0 ? g[rec.request_id][x_star[rec.request_id]]
                                    : 0.0;
    const double got = rec.ssm_id >= 0 ? g[rec.request_id][rec.ssm_id] : 0.0;
    totals[rec.slot] += best - got + lambda * rec.switch_cost_sec;
  }
  for (long long t = 1; t < total_slots; ++t) totals[t] += totals[t - 1];
  return totals;
}

bool regret_sublinearity() {
  const auto start = Clock::now();
  const ExperimentConfig preset = presets::hetero();
  const long long horizon = preset.bandit.max_slots;  // 2000

  std::vector<std::vector<double>> curves;  // per-seed cumulative totals
  std::vector<long long> endpoints;
  for (int rep = 0; rep < 10; ++rep) {
    WorkloadSpec spec = preset.workload;
    spec.seed = preset.workload.seed + rep;
    const auto requests = generate_workload(spec);
    const auto g = true_goodput_matrix(spec, requests);
    MatchingInstance truth;
    truth.weights = g;
    for (const auto& s : spec.ssm_profiles) {
      truth.capacities.push_back(s.batch_capacity);
    }
    const std::vector<int> x_star =
        solve_max_weight_matching(truth).assignment;

    LbssOptions options;
    options.engine.packing = preset.packer.decomposition;
    options.ground_truth = &g;
    const PolicyRunResult run = run_lbss(preset.bandit, spec, options);
    curves.push_back(pseudo_regret_per_slot(run.history, g, x_star,
                                            preset.bandit.lambda, horizon));
    if (rep == 0) {
      for (const RegretPoint& p : run.regret_curve) endpoints.push_back(p.slot);
    }
  }

  std::vector<double> mean_curve(horizon, 0.0);
  for (const auto& curve : curves) {
    for (long long t = 0; t < horizon; ++t) mean_curve[t] += curve[t] / 10.0;
  }

  std::vector<double> xs, ys;
  for (long long endpoint : endpoints) {
    if (endpoint < 4) continue;  // log2 of tiny horizons is noise
    xs.push_back(std::log2(static_cast<double>(endpoint)));
    ys.push_back(mean_curve[endpoint - 1]);
  }
  const LinearFit fit = fit_line(xs, ys);

  const double rate_early = mean_curve[199] / 200.0;
  const double rate_late = mean_curve[1999] / 2000.0;
  const double elapsed = seconds_since(start);
  std::printf(
      "    fit R^2 = %.4f (a = %.1f), R(200)/200 = %.2f, R(2000)/2000 = %.2f, "
      "%.2fs\n",
      fit.r_squared, fit.slope, rate_early, rate_late, elapsed);
  return fit.r_squared >= 0.9 && rate_late < 0.5 * rate_early &&
         elapsed < 60.0;
}

// ---------------------------------------------------------------------------
// 5. Policy dominance on the heterogeneous preset.
bool policy_dominance() {
  ExperimentConfig base = presets::hetero();
  base.repetitions = 10;
  ExperimentConfig lbss = base;
  lbss.name = "lbss";
  lbss.policy = PolicyKind::Lbss;
  ExperimentConfig egreedy = base;
  egreedy.name = "egreedy";
  egreedy.policy = PolicyKind::EpsilonGreedy;
  egreedy.epsilon = 0.2;
  ExperimentConfig greedy = base;
  greedy.name = "greedy";
  greedy.policy = PolicyKind::Greedy;

  const ComparisonTable table = compare_policies({lbss, egreedy, greedy});
  const double g_lbss = table.rows[0].goodput.mean;
  const double g_egreedy = table.rows[1].goodput.mean;
  const double g_greedy = table.rows[2].goodput.mean;
  std::printf("    lbss %.1f vs egreedy %.1f (x%.2f) vs greedy %.1f (x%.2f)\n",
              g_lbss, g_egreedy, g_lbss / g_egreedy, g_greedy,
              g_lbss / g_greedy);
  return g_lbss >= 1.2 * g_egreedy && g_lbss >= 1.5 * g_greedy;
}

// ---------------------------------------------------------------------------
// 6. Pipeline shape on the fig9-like preset.
bool unimodal(const std::vector<double>& curve, double tolerance) {
  std::size_t peak = 0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (curve[i] > curve[peak]) peak = i;
  }
  for (std::size_t i = 0; i + 1 <= peak; ++i) {
    if (curve[i + 1] < curve[i] * (1.0 - tolerance)) return false;
  }
  for (std::size_t i = peak; i + 1 < curve.size(); ++i) {
    if (curve[i + 1] > curve[i] * (1.0 + tolerance)) return false;
  }
  return true;
}

bool pipeline_shape() {
  ExperimentConfig preset = presets::fig9();
  bool all_unimodal = true;
  bool tuned_ok = true;
  bool idle_ok = true;
  double example_peak = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const std::uint64_t seed = preset.workload.seed + rep;
    const SingleRun single = run_single(preset, seed);
    const PipelineScenario scenario = eval_scenario(preset, single.run, seed);

    std::vector<int> batch_sizes(scenario.ssm_profiles.size(), 0);
    for (std::size_t i = 0; i < scenario.assignment.size(); ++i) {
      if (scenario.assignment[i] >= 0) ++batch_sizes[scenario.assignment[i]];
    }
    std::vector<double> curve;
    for (int b = 1; b <= 8; ++b) {
      const EventTrace trace = simulate_pipelined(
          scenario, uniform_plan(batch_sizes, b), preset.pipeline.eval_slots);
      curve.push_back(throughput(trace).tokens_per_sec);
    }
    const double best = *std::max_element(curve.begin(), curve.end());
    if (curve.front() >= best || curve.back() >= best) {
      all_unimodal = false;  // must rise from b=1 and fall by b=8
    }
    if (!unimodal(curve, 0.01)) all_unimodal = false;
    if (rep == 0) {
      example_peak = best / curve.front();
    }

    TuneConfig tune;
    tune.initial_micro_batches = preset.pipeline.initial_micro_batches;
    tune.degradation_threshold = preset.pipeline.degradation_threshold;
    tune.probe_slots = preset.pipeline.probe_slots;
    tune.max_micro_batches = preset.pipeline.max_micro_batches;
    const MicroBatchPlan plan = tune_micro_batches(scenario, tune);
    const EventTrace tuned_trace =
        simulate_pipelined(scenario, plan, preset.pipeline.eval_slots);
    if (throughput(tuned_trace).tokens_per_sec < 0.9 * best) tuned_ok = false;

    if (single.record.eval_idle_fraction >
        single.record.serial_idle_fraction + 1e-9) {
      idle_ok = false;
    }
  }
  std::printf(
      "    unimodal: %s, tuned >= 90%% of sweep best: %s, idle <= serial: %s "
      "(peak uplift x%.2f)\n",
      all_unimodal ? "yes" : "no", tuned_ok ? "yes" : "no",
      idle_ok ? "yes" : "no", example_peak);
  return all_unimodal && tuned_ok && idle_ok;
}

// ---------------------------------------------------------------------------
// 7. Ablation monotonicity on the mix preset.
bool ablation_monotonicity() {
  const ExperimentConfig preset = presets::mix();

  auto eval_mean = [](const ExperimentConfig& config) {
    return run_experiment(config).eval_goodput.mean;
  };

  double best_vanilla = 0.0;
  int best_type = 0;
  for (std::size_t type = 0; type < preset.workload.ssm_profiles.size();
       ++type) {
    ExperimentConfig vanilla = preset;
    vanilla.name = "vanilla" + std::to_string(type);
    vanilla.policy = PolicyKind::Vanilla;
    vanilla.vanilla_ssm = static_cast<int>(type);
    vanilla.packer.decomposition = false;
    vanilla.pipeline.mode = PipelineMode::Serial;
    vanilla.bandit.max_slots = 50;  // static policy needs no learning phase
    const double mean = eval_mean(vanilla);
    if (mean > best_vanilla) {
      best_vanilla = mean;
      best_type = static_cast<int>(type);
    }
  }

  ExperimentConfig selection = preset;
  selection.packer.decomposition = false;
  selection.pipeline.mode = PipelineMode::Serial;
  const double hetero_selection = eval_mean(selection);

  ExperimentConfig packed = preset;
  packed.packer.decomposition = true;
  packed.pipeline.mode = PipelineMode::Serial;
  const double with_packing = eval_mean(packed);

  ExperimentConfig full = preset;
  full.packer.decomposition = true;
  full.pipeline.mode = PipelineMode::Tuned;
  const double with_pipeline = eval_mean(full);

  std::printf(
      "    vanilla(best=ssm%d) %.0f <= +selection %.0f <= +packing %.0f <= "
      "+pipeline %.0f (uplift x%.2f)\n",
      best_type, best_vanilla, hetero_selection, with_packing, with_pipeline,
      with_pipeline / best_vanilla);
  return best_vanilla <= hetero_selection &&
         hetero_selection <= with_packing && with_packing <= with_pipeline &&
         with_pipeline >= 1.5 * best_vanilla;
}

// ---------------------------------------------------------------------------
// 8. Determinism: identical config and seed reproduce every emitted byte.
bool determinism() {
  ExperimentConfig config = presets::hetero();
  config.repetitions = 2;
  config.bandit.max_slots = 300;
  const MetricsReport first = run_experiment(config);
  const MetricsReport second = run_experiment(config);
  if (report_json(first) != report_json(second)) {
    std::printf("    reports differ\n");
    return false;
  }

  ExperimentConfig tuned = presets::mix();
  tuned.repetitions = 1;
  tuned.bandit.max_slots = 100;
  const SingleRun a = run_single(tuned, tuned.workload.seed);
  const SingleRun b = run_single(tuned, tuned.workload.seed);
  if (trace_csv(a.eval_trace) != trace_csv(b.eval_trace) ||
      trace_json(a.eval_trace) != trace_json(b.eval_trace) ||
      history_csv(a.run.history) != history_csv(b.run.history)) {
    std::printf("    trace or history exports differ\n");
    return false;
  }
  std::printf("    reports, traces, and histories byte-identical\n");
  return true;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    bool (*check)();
  };
  const std::vector<Criterion> criteria{
      {"1. attention exactness (1e-9, <10s)", attention_exactness},
      {"2. matching optimality (exact tie, <5s)", matching_optimality},
      {"3. packing quality (exhaustive min, >=30% cut)", packing_quality},
      {"4. regret sublinearity (R^2 >= 0.9, rate halves)", regret_sublinearity},
      {"5. policy dominance (>=1.2x egreedy, >=1.5x greedy)", policy_dominance},
      {"6. pipeline shape (unimodal, tuned >= 90%, idle <= serial)",
       pipeline_shape},
      {"7. ablation monotonicity (4 rungs, >=1.5x uplift)",
       ablation_monotonicity},
      {"8. determinism (byte-identical reruns)", determinism},
  };

  int failures = 0;
  for (const Criterion& criterion : criteria) {
    bool ok = false;
    try {
      ok = criterion.check();
    } catch (const std::exception& e) {
      std::printf("    exception: %s\n", e.what());
      ok = false;
    }
    std::printf("%s - %s\n", ok ? "PASS" : "FAIL", criterion.name);
    if (!ok) ++failures;
  }
  if (failures == 0) {
    std::printf("all %zu acceptance criteria passed\n", criteria.size());
  } else {
    std::printf("%d acceptance criteria failed\n", failures);
  }
  return failures;
}
