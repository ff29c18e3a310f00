#pragma once

#include <cstdint>
#include <vector>

#include "specsim/packing.hpp"

namespace specsim {

// Minimal dense row-major matrix for the toy attention oracle.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
};

// Per-request toy attention inputs: projections are already applied, so Q
// has one row per query token and K/V one row per KV token.
struct ToyAttentionInput {
  Matrix q;
  Matrix k;
  Matrix v;
};

// Dense dot-product attention with softmax normalization over one
// request: O_i = sum_j a_ij V_j with a_ij = exp(Q_i K_j^T) normalized per
// query row. Max-subtraction keeps the exponentials stable without
// changing the result.
Matrix reference_attention(const Matrix& q, const Matrix& k, const Matrix& v);

// Attention computed on the packed KV tensors: per request, exp scores are
// gathered across every row holding one of its segments (its Q block is
// replicated to those rows), cross-request terms are masked out via the
// indicator, and numerators/denominators are aggregated before the final
// division. Returns one output matrix per request, numerically matching
// reference_attention on that request's inputs.
std::vector<Matrix> decomposed_attention(
    const std::vector<ToyAttentionInput>& inputs, const PackedLayout& layout,
    const IndicatorMask& mask);

// Deterministic toy inputs with entries in [-1, 1].
ToyAttentionInput make_toy_input(std::uint64_t seed, int queries, int kv_len,
                                 int dim);

}  // namespace specsim
