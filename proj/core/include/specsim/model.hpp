#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "specsim/rng.hpp"

namespace specsim {

enum class RequestState { Waiting, Active, Finished };

// One inference request. accept_prob holds the ground-truth per-token
// acceptance probability for every speculative model in the cluster; the
// selection algorithms never read it, only the outcome sampler does.
struct Request {
  int id = 0;
  int prompt_len = 1;
  long long target_len = 1;
  std::vector<double> accept_prob;  // indexed by ssm id
  long long generated_len = 0;
  RequestState state = RequestState::Waiting;
  int active_ssm = -1;

  long long kv_len(int window) const {
    return prompt_len + generated_len + window;
  }
};

// Speed and capacity model of one speculative model instance.
struct SsmProfile {
  int id = 0;
  double tokens_per_sec = 1.0;
  int batch_capacity = 1;
  double batch_slowdown = 0.0;  // linear cost factor per extra request
};

// Verifier cost model: one forward pass costs a fixed overhead plus a
// per-token charge that includes padding tokens.
struct LlmProfile {
  double fixed_overhead_sec = 0.0;
  double per_token_sec = 0.0;
};

// A difficulty class: weight in the mix, per-ssm acceptance range, and the
// prompt/target length ranges its requests are drawn from.
struct DifficultyClass {
  std::string name;
  double weight = 1.0;
  std::vector<std::pair<double, double>> accept_range;  // per ssm, [lo, hi]
  int prompt_len_lo = 1;
  int prompt_len_hi = 1;
  long long target_len_lo = 1;
  long long target_len_hi = 1;
};

struct WorkloadSpec {
  int num_requests = 0;
  std::vector<SsmProfile> ssm_profiles;
  LlmProfile llm;
  std::vector<DifficultyClass> difficulty_mix;
  int window = 1;
  std::uint64_t seed = 0;
  bool bonus_token = true;  // verifier emits one token after the rejected position

  int total_capacity() const {
    int sum = 0;
    for (const auto& s : ssm_profiles) sum += s.batch_capacity;
    return sum;
  }
};

// Result of one speculation+verification round for one request.
struct SpeculationOutcome {
  int request_id = 0;
  int ssm_id = 0;
  int proposed = 0;
  int accepted = 0;
  int bonus = 0;
  double wall_time_sec = 0.0;
};

// Throws ConfigError when the spec violates its invariants.
void validate(const WorkloadSpec& spec);

// Validates the spec and draws num_requests requests. The same spec and
// seed always produce the same workload.
std::vector<Request> generate_workload(const WorkloadSpec& spec);

// Length of the leading run of successes among `window` i.i.d. Bernoulli
// draws with the request's acceptance probability on ssm_id.
int sample_accepted_prefix(const Request& request, int ssm_id, int window,
                           Rng& rng);

// Closed-form expectation of sample_accepted_prefix: sum_{k=1..w} p^k.
double expected_accepted_prefix(double p, int window);

// Wall time for one speculation round of `window` tokens per request at the
// given batch size: window / tokens_per_sec * (1 + slowdown * (batch - 1)).
double speculation_time(const SsmProfile& ssm, int batch_size, int window);

// Wall time of one verification pass over total_tokens (padding included).
double verification_time(const LlmProfile& llm, long long total_tokens);

// Tokens emitted per second in the round: (accepted + bonus) / wall_time.
double observed_goodput(const SpeculationOutcome& outcome);

}  // namespace specsim
