#include "specsim/model.hpp"

#include <cmath>
#include <cstdlib>

#include "specsim/errors.hpp"

namespace specsim {

void validate(const WorkloadSpec& spec) {
  if (spec.ssm_profiles.empty()) {
    throw ConfigError("workload: ssm_profiles must not be empty");
  }
  if (spec.num_requests < 0) {
    throw ConfigError("workload: num_requests must be non-negative");
  }
  if (spec.window < 1) {
    throw ConfigError("workload: window must be at least 1");
  }
  for (const auto& s : spec.ssm_profiles) {
    if (!(s.tokens_per_sec > 0.0)) {
      throw ConfigError("ssm " + std::to_string(s.id) +
                        ": tokens_per_sec must be positive");
    }
    if (s.batch_capacity < 1) {
      throw ConfigError("ssm " + std::to_string(s.id) +
                        ": batch_capacity must be at least 1");
    }
    if (s.batch_slowdown < 0.0) {
      throw ConfigError("ssm " + std::to_string(s.id) +
                        ": batch_slowdown must be non-negative");
    }
  }
  if (!(spec.llm.fixed_overhead_sec >= 0.0) ||
      !std::isfinite(spec.llm.fixed_overhead_sec)) {
    throw ConfigError("llm: fixed_overhead_sec must be finite and >= 0");
  }
  if (!(spec.llm.per_token_sec >= 0.0) ||
      !std::isfinite(spec.llm.per_token_sec)) {
    throw ConfigError("llm: per_token_sec must be finite and >= 0");
  }
  if (spec.difficulty_mix.empty()) {
    throw ConfigError("workload: difficulty_mix must not be empty");
  }
  double weight_sum = 0.0;
  for (const auto& c : spec.difficulty_mix) {
    if (c.weight < 0.0) {
      throw ConfigError("class " + c.name + ": weight must be non-negative");
    }
    weight_sum += c.weight;
    if (c.accept_range.size() != spec.ssm_profiles.size()) {
      throw ConfigError("class " + c.name +
                        ": accept_range needs one [lo, hi] entry per ssm");
    }
    for (const auto& [lo, hi] : c.accept_range) {
      if (!(0.0 <= lo && lo <= hi && hi <= 1.0)) {
        throw ConfigError("class " + c.name +
                          ": acceptance ranges must satisfy 0 <= lo <= hi <= 1");
      }
    }
    if (c.prompt_len_lo < 1 || c.prompt_len_hi < c.prompt_len_lo) {
      throw ConfigError("class " + c.name + ": invalid prompt length range");
    }
    if (c.target_len_lo < 1 || c.target_len_hi < c.target_len_lo) {
      throw ConfigError("class " + c.name + ": invalid target length range");
    }
  }
  if (std::abs(weight_sum - 1.0) > 1e-9) {
    throw ConfigError("workload: difficulty_mix weights must sum to 1");
  }
}

std::vector<Request> generate_workload(const WorkloadSpec& spec) {
  validate(spec);
  Rng rng(mix_seed(spec.seed, kStreamWorkload));
  const std::size_t num_ssms = spec.ssm_profiles.size();

  std::vector<Request> requests;
  requests.reserve(spec.num_requests);
  for (int i = 0; i < spec.num_requests; ++i) {
    // Class pick by cumulative weight, then lengths, then per-ssm
    // acceptance. The draw order is part of the determinism contract.
    const double u = rng.unit();
    std::size_t cls = spec.difficulty_mix.size() - 1;
    double acc = 0.0;
    for (std::size_t c = 0; c < spec.difficulty_mix.size(); ++c) {
      acc += spec.difficulty_mix[c].weight;
      if (u < acc) {
        cls = c;
        break;
      }
    }
    const DifficultyClass& dc = spec.difficulty_mix[cls];

    Request r;
    r.id = i;
    r.prompt_len =
        static_cast<int>(rng.uniform_int(dc.prompt_len_lo, dc.prompt_len_hi));
    r.target_len = rng.uniform_int(dc.target_len_lo, dc.target_len_hi);
    r.accept_prob.resize(num_ssms);
    for (std::size_t j = 0; j < num_ssms; ++j) {
      const auto& [lo, hi] = dc.accept_range[j];
      r.accept_prob[j] = lo == hi ? lo : rng.uniform(lo, hi);
    }
    requests.push_back(std::move(r));
  }
  return requests;
}

int sample_accepted_prefix(const Request& request, int ssm_id, int window,
                           Rng& rng) {
  if (ssm_id < 0 ||
      static_cast<std::size_t>(ssm_id) >= request.accept_prob.size()) {
    throw InputError("sample_accepted_prefix: unknown ssm id " +
                     std::to_string(ssm_id));
  }
  if (window < 1) {
    throw InputError("sample_accepted_prefix: window must be at least 1");
  }
  const double p = request.accept_prob[ssm_id];
  // Draw all `window` tokens so the stream position after a round depends
  // only on the window, not on the realized prefix.
  int accepted = 0;
  bool run_alive = true;
  for (int k = 0; k < window; ++k) {
    const bool ok = rng.bernoulli(p);
    if (run_alive && ok) {
      ++accepted;
    } else {
      run_alive = false;
    }
  }
  return accepted;
}

double expected_accepted_prefix(double p, int window) {
  if (p >= 1.0) return static_cast<double>(window);
  if (p <= 0.0) return 0.0;
  // sum_{k=1..w} p^k = (p - p^{w+1}) / (1 - p)
  return (p - std::pow(p, window + 1)) / (1.0 - p);
}

double speculation_time(const SsmProfile& ssm, int batch_size, int window) {
  if (batch_size < 1) {
    throw CapacityError("speculation_time: batch_size must be at least 1");
  }
  if (batch_size > ssm.batch_capacity) {
    throw CapacityError("speculation_time: batch_size " +
                        std::to_string(batch_size) + " exceeds capacity " +
                        std::to_string(ssm.batch_capacity) + " of ssm " +
                        std::to_string(ssm.id));
  }
  return static_cast<double>(window) / ssm.tokens_per_sec *
         (1.0 + ssm.batch_slowdown * (batch_size - 1));
}

double verification_time(const LlmProfile& llm, long long total_tokens) {
  if (total_tokens < 0) {
    throw InputError("verification_time: token count must be non-negative");
  }
  return llm.fixed_overhead_sec +
         llm.per_token_sec * static_cast<double>(total_tokens);
}

double observed_goodput(const SpeculationOutcome& outcome) {
  if (!(outcome.wall_time_sec > 0.0)) {
    throw InputError("observed_goodput: wall time must be positive");
  }
  return static_cast<double>(outcome.accepted + outcome.bonus) /
         outcome.wall_time_sec;
}

}  // namespace specsim
