#include "specsim/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "specsim/errors.hpp"
#include "specsim/rng.hpp"

namespace specsim {

namespace {

double dot(const Matrix& a, int row_a, const Matrix& b, int row_b) {
  double s = 0.0;
  for (int c = 0; c < a.cols; ++c) {
    s += a.at(row_a, c) * b.at(row_b, c);
  }
  return s;
}

void check_layout_consistency(const std::vector<ToyAttentionInput>& inputs,
                              const PackedLayout& layout,
                              const IndicatorMask& mask) {
  const IndicatorMask rebuilt = build_indicator(layout);
  if (rebuilt.width != mask.width || rebuilt.length != mask.length ||
      rebuilt.cells != mask.cells) {
    throw ConsistencyError("decomposed_attention: mask does not match layout");
  }
  // Every request's KV tokens must be covered exactly once, in order.
  std::vector<std::vector<char>> covered(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    covered[i].assign(inputs[i].k.rows, 0);
  }
  for (const Segment& s : layout.segments) {
    if (s.request_id < 0 ||
        static_cast<std::size_t>(s.request_id) >= inputs.size()) {
      throw ConsistencyError("decomposed_attention: segment references unknown request");
    }
    for (int t = 0; t < s.length(); ++t) {
      const int token = s.token_offset + t;
      if (token >= inputs[s.request_id].k.rows ||
          covered[s.request_id][token]) {
        throw ConsistencyError("decomposed_attention: segment tokens do not tile the request");
      }
      covered[s.request_id][token] = 1;
    }
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (char c : covered[i]) {
      if (!c) {
        throw ConsistencyError("decomposed_attention: request " +
                               std::to_string(i) + " not fully packed");
      }
    }
    if (inputs[i].k.rows != inputs[i].v.rows ||
        inputs[i].k.cols != inputs[i].q.cols ||
        inputs[i].v.cols != inputs[i].q.cols) {
      throw InputError("decomposed_attention: inconsistent input shapes");
    }
  }
}

}  // namespace

Matrix reference_attention(const Matrix& q, const Matrix& k, const Matrix& v) {
  if (k.rows != v.rows || q.cols != k.cols || v.cols != q.cols) {
    throw InputError("reference_attention: shape mismatch");
  }
  if (k.rows == 0) {
    throw InputError("reference_attention: empty KV");
  }
  Matrix out(q.rows, v.cols);
  std::vector<double> scores(k.rows);
  for (int i = 0; i < q.rows; ++i) {
    double max_score = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < k.rows; ++j) {
      scores[j] = dot(q, i, k, j);
      max_score = std::max(max_score, scores[j]);
    }
    double denom = 0.0;
    for (int j = 0; j < k.rows; ++j) {
      scores[j] = std::exp(scores[j] - max_score);
      denom += scores[j];
    }
    for (int c = 0; c < v.cols; ++c) {
      double num = 0.0;
      for (int j = 0; j < k.rows; ++j) {
        num += scores[j] * v.at(j, c);
      }
      out.at(i, c) = num / denom;
    }
  }
  return out;
}

std::vector<Matrix> decomposed_attention(
    const std::vector<ToyAttentionInput>& inputs, const PackedLayout& layout,
    const IndicatorMask& mask) {
  check_layout_consistency(inputs, layout, mask);

  const int n = static_cast<int>(inputs.size());
  const int dim = n > 0 ? inputs[0].q.cols : 0;

  // Packed K/V tensors; padding cells stay zero and are never read because
  // the indicator gates every access.
  Matrix packed_k(layout.width * layout.length, dim);
  Matrix packed_v(layout.width * layout.length, dim);
  auto cell = [&](int row, int col) { return row * layout.length + col; };
  for (const Segment& s : layout.segments) {
    const ToyAttentionInput& in = inputs[s.request_id];
    for (int t = 0; t < s.length(); ++t) {
      for (int c = 0; c < dim; ++c) {
        packed_k.at(cell(s.row, s.col_start + t), c) =
            in.k.at(s.token_offset + t, c);
        packed_v.at(cell(s.row, s.col_start + t), c) =
            in.v.at(s.token_offset + t, c);
      }
    }
  }

  std::vector<Matrix> outputs;
  outputs.reserve(n);
  for (int i = 0; i < n; ++i) {
    const ToyAttentionInput& in = inputs[i];
    Matrix out(in.q.rows, dim);
    // Rows holding this request's segments; its Q block is replicated to
    // each of them and the indicator selects its own KV columns.
    for (int qi = 0; qi < in.q.rows; ++qi) {
      // One shared max across all of the request's cells: per-row maxima
      // would not cancel when numerator and denominator are aggregated
      // across rows.
      double max_score = -std::numeric_limits<double>::infinity();
      for (const Segment& s : layout.segments) {
        if (s.request_id != i) continue;
        for (int col = s.col_start; col < s.col_end; ++col) {
          max_score =
              std::max(max_score, dot(in.q, qi, packed_k, cell(s.row, col)));
        }
      }
      double denom = 0.0;
      std::vector<double> num(dim, 0.0);
      for (int row = 0; row < layout.width; ++row) {
        for (int col = 0; col < layout.length; ++col) {
          if (mask.at(row, col) != i) continue;
          const double f =
              std::exp(dot(in.q, qi, packed_k, cell(row, col)) - max_score);
          denom += f;
          for (int c = 0; c < dim; ++c) {
            num[c] += f * packed_v.at(cell(row, col), c);
          }
        }
      }
      for (int c = 0; c < dim; ++c) {
        out.at(qi, c) = num[c] / denom;
      }
    }
    outputs.push_back(std::move(out));
  }
  return outputs;
}

ToyAttentionInput make_toy_input(std::uint64_t seed, int queries, int kv_len,
                                 int dim) {
  Rng rng(mix_seed(seed, kStreamToyAttention));
  ToyAttentionInput in;
  in.q = Matrix(queries, dim);
  in.k = Matrix(kv_len, dim);
  in.v = Matrix(kv_len, dim);
  for (double& x : in.q.data) x = rng.uniform(-1.0, 1.0);
  for (double& x : in.k.data) x = rng.uniform(-1.0, 1.0);
  for (double& x : in.v.data) x = rng.uniform(-1.0, 1.0);
  return in;
}

}  // namespace specsim
