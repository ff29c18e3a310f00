#include "specsim/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "specsim/errors.hpp"

namespace specsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_instance(const MatchingInstance& instance) {
  const int n = instance.num_requests();
  const int m = instance.num_ssms();
  if (m == 0) {
    throw InputError("matching: instance has no ssms");
  }
  for (int c : instance.capacities) {
    if (c < 1) throw InputError("matching: capacities must be at least 1");
  }
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(instance.weights[i].size()) != m) {
      throw InputError("matching: weight row " + std::to_string(i) +
                       " has wrong width");
    }
    for (double w : instance.weights[i]) {
      if (!std::isfinite(w)) {
        throw InputError("matching: weights must be finite");
      }
    }
  }
}

// Classic O(n^3) Hungarian algorithm with potentials, minimizing total cost
// of a square matrix. Only strict comparisons on slack values are used, so
// the result is stable under positive rescaling of the input.
std::vector<int> hungarian_min(const std::vector<std::vector<double>>& a) {
  const int n = static_cast<int>(a.size());
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = -1;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] >= 1) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

// Best achievable total weight of an instance (maximization), via KM on
// the replica expansion. Rows beyond the real request count are dummies.
double km_best_total(const MatchingInstance& instance) {
  const int n = instance.num_requests();
  if (n == 0) return 0.0;
  if (instance.total_capacity() == 0) return 0.0;
  ReplicaExpansion ex = expand_replicas(instance);
  // Maximize by minimizing negated weights.
  std::vector<std::vector<double>> cost(ex.size,
                                        std::vector<double>(ex.size, 0.0));
  for (int i = 0; i < ex.size; ++i) {
    for (int j = 0; j < ex.size; ++j) {
      cost[i][j] = -ex.weights[i][j];
    }
  }
  const std::vector<int> row_to_col = hungarian_min(cost);
  double total = 0.0;
  for (int i = 0; i < ex.real_rows; ++i) {
    const int col = row_to_col[i];
    if (col >= 0 && col < ex.real_cols) {
      total += ex.weights[i][col];
    }
  }
  return total;
}

MatchingInstance sub_instance(const MatchingInstance& instance, int from_row,
                              const std::vector<int>& caps_left) {
  MatchingInstance sub;
  const int m = instance.num_ssms();
  std::vector<int> col_of(m, -1);
  for (int j = 0; j < m; ++j) {
    if (caps_left[j] > 0) {
      col_of[j] = static_cast<int>(sub.capacities.size());
      sub.capacities.push_back(caps_left[j]);
    }
  }
  for (int i = from_row; i < instance.num_requests(); ++i) {
    std::vector<double> row;
    row.reserve(sub.capacities.size());
    for (int j = 0; j < m; ++j) {
      if (col_of[j] >= 0) row.push_back(instance.weights[i][j]);
    }
    sub.weights.push_back(std::move(row));
  }
  return sub;
}

}  // namespace

ReplicaExpansion expand_replicas(const MatchingInstance& instance) {
  validate_instance(instance);
  ReplicaExpansion ex;
  ex.real_rows = instance.num_requests();
  ex.real_cols = instance.total_capacity();
  ex.size = std::max(ex.real_rows, ex.real_cols);
  ex.column_ssm.assign(ex.size, -1);
  int col = 0;
  for (int j = 0; j < instance.num_ssms(); ++j) {
    for (int r = 0; r < instance.capacities[j]; ++r) {
      ex.column_ssm[col++] = j;
    }
  }
  ex.weights.assign(ex.size, std::vector<double>(ex.size, 0.0));
  for (int i = 0; i < ex.real_rows; ++i) {
    for (int c = 0; c < ex.real_cols; ++c) {
      ex.weights[i][c] = instance.weights[i][ex.column_ssm[c]];
    }
  }
  return ex;
}

MatchResult solve_max_weight_matching(const MatchingInstance& instance) {
  validate_instance(instance);
  const int n = instance.num_requests();
  const int m = instance.num_ssms();
  MatchResult result;
  result.assignment.assign(n, kUnassigned);
  if (n == 0) return result;

  const double best = km_best_total(instance);
  const double tol = 1e-9 * std::max(1.0, std::abs(best));

  // Lexicographic canonicalization: commit requests in id order to the
  // lowest ssm id that still admits an optimal completion, preferring any
  // assignment over Unassigned on ties.
  std::vector<int> caps_left = instance.capacities;
  double fixed = 0.0;
  for (int i = 0; i < n; ++i) {
    bool committed = false;
    for (int j = 0; j < m && !committed; ++j) {
      if (caps_left[j] == 0) continue;
      const double w = instance.weights[i][j];
      --caps_left[j];
      const double rest = km_best_total(sub_instance(instance, i + 1, caps_left));
      if (fixed + w + rest >= best - tol) {
        result.assignment[i] = j;
        fixed += w;
        committed = true;
      } else {
        ++caps_left[j];
      }
    }
    if (!committed) {
      result.assignment[i] = kUnassigned;  // optimal completions skip i
    }
  }
  result.total_weight = fixed;
  return result;
}

MatchResult brute_force_matching(const MatchingInstance& instance) {
  validate_instance(instance);
  const int n = instance.num_requests();
  if (n > 8 || instance.total_capacity() > 8) {
    throw SizeError("brute_force_matching: guard is N <= 8 and total capacity <= 8");
  }
  MatchResult best;
  best.assignment.assign(n, kUnassigned);
  best.total_weight = -kInf;

  std::vector<int> caps_left = instance.capacities;
  std::vector<int> current(n, kUnassigned);

  // DFS in lexicographic order; strict improvement keeps the first (and
  // therefore lexicographically smallest) maximizer.
  auto dfs = [&](auto&& self, int i, double total) -> void {
    if (i == n) {
      if (total > best.total_weight) {
        best.total_weight = total;
        best.assignment = current;
      }
      return;
    }
    for (int j = 0; j < instance.num_ssms(); ++j) {
      if (caps_left[j] == 0) continue;
      --caps_left[j];
      current[i] = j;
      self(self, i + 1, total + instance.weights[i][j]);
      current[i] = kUnassigned;
      ++caps_left[j];
    }
    self(self, i + 1, total);  // leave request i unassigned
  };
  dfs(dfs, 0, 0.0);
  return best;
}

}  // namespace specsim
