#pragma once

#include <vector>

namespace specsim {

inline constexpr int kUnassigned = -1;

// Assignment problem between requests (rows) and speculative models
// (columns) with per-column capacities.
struct MatchingInstance {
  std::vector<std::vector<double>> weights;  // N x M, finite
  std::vector<int> capacities;               // per ssm, >= 1

  int num_requests() const { return static_cast<int>(weights.size()); }
  int num_ssms() const { return static_cast<int>(capacities.size()); }
  int total_capacity() const {
    int sum = 0;
    for (int c : capacities) sum += c;
    return sum;
  }
};

struct MatchResult {
  std::vector<int> assignment;  // per request: ssm id or kUnassigned
  double total_weight = 0.0;
};

// Replica expansion of an instance: ssm j contributes capacity_j identical
// columns, and the matrix is padded with zero-weight dummy rows/columns to
// a square. column_ssm maps each column back to its ssm (-1 for dummies).
struct ReplicaExpansion {
  std::vector<std::vector<double>> weights;  // square, size x size
  std::vector<int> column_ssm;
  int real_rows = 0;
  int real_cols = 0;
  int size = 0;
};

ReplicaExpansion expand_replicas(const MatchingInstance& instance);

// Maximum-weight capacity-feasible assignment via the Kuhn-Munkres
// algorithm on the replica-expanded matrix. Among all optimal assignments
// (with non-negative weights) the lexicographically smallest one is
// returned: lowest request id first, then lowest ssm id, with Unassigned
// ordered after every ssm.
MatchResult solve_max_weight_matching(const MatchingInstance& instance);

// Exhaustive-search oracle. Guarded to N <= 8 and total capacity <= 8;
// returns the lexicographically smallest maximizer.
MatchResult brute_force_matching(const MatchingInstance& instance);

}  // namespace specsim
