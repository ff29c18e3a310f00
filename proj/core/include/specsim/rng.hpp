#pragma once

#include <cstdint>
#include <random>

namespace specsim {

// SplitMix64 finalizer. Used to derive well-separated stream seeds from a
// base seed plus integer tags, so that independent draw streams (workload
// generation, policy decisions, per-slot outcomes) never interleave.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a,
                              std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  return h;
}

// Stream tags for mix_seed. Keeping them in one place guarantees two
// subsystems never collide on the same derived stream.
enum : std::uint64_t {
  kStreamWorkload = 0x01,
  kStreamPolicy = 0x02,
  kStreamOutcome = 0x03,
  kStreamToyAttention = 0x04,
};

// Deterministic RNG wrapper. mt19937_64 output is pinned by the standard;
// the distributions below are implemented by hand because the std
// distribution objects are implementation-defined and would break the
// byte-identical replay contract across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  bool bernoulli(double p) { return unit() < p; }

  // Uniform integer in [lo, hi], inclusive. Rejection sampling keeps it
  // exactly uniform.
  long long uniform_int(long long lo, long long hi) {
    if (hi <= lo) return lo;
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t draw;
    do {
      draw = engine_();
    } while (draw >= limit);
    return lo + static_cast<long long>(draw % range);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace specsim
