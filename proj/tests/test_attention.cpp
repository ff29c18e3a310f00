#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <specsim/attention.hpp>
#include <specsim/errors.hpp>
#include <specsim/packing.hpp>
#include <specsim/rng.hpp>

using namespace specsim;

namespace {

double max_abs_diff(const Matrix& a, const Matrix& b) {
  REQUIRE(a.rows == b.rows);
  REQUIRE(a.cols == b.cols);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
  }
  return worst;
}

std::vector<int> kv_lens_of(const std::vector<ToyAttentionInput>& inputs) {
  std::vector<int> lens;
  for (const auto& in : inputs) lens.push_back(in.k.rows);
  return lens;
}

}  // namespace

TEST_CASE("identical keys spread attention uniformly") {
  const int n = 5, d = 4;
  Matrix q(2, d), k(n, d), v(n, d);
  Rng rng(1);
  for (double& x : q.data) x = rng.uniform(-1.0, 1.0);
  for (int c = 0; c < d; ++c) {
    const double key = 0.3 * c;
    for (int j = 0; j < n; ++j) k.at(j, c) = key;
  }
  for (double& x : v.data) x = rng.uniform(-1.0, 1.0);

  const Matrix out = reference_attention(q, k, v);
  for (int c = 0; c < d; ++c) {
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += v.at(j, c);
    mean /= n;
    CHECK(out.at(0, c) == doctest::Approx(mean).epsilon(1e-12));
    CHECK(out.at(1, c) == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("single kv token passes its value through") {
  ToyAttentionInput in = make_toy_input(7, 3, 1, 4);
  const Matrix out = reference_attention(in.q, in.k, in.v);
  for (int i = 0; i < 3; ++i) {
    for (int c = 0; c < 4; ++c) {
      CHECK(out.at(i, c) == doctest::Approx(in.v.at(0, c)).epsilon(1e-12));
    }
  }
}

TEST_CASE("attention rows are normalized") {
  // One-hot values turn each output row into the row sum of the attention
  // scores, which must be 1.
  const int n = 4, d = 4;
  ToyAttentionInput in = make_toy_input(11, 3, n, d);
  Matrix one_hot(n, d);
  for (int j = 0; j < n; ++j) one_hot.at(j, j) = 1.0;
  const Matrix out = reference_attention(in.q, in.k, one_hot);
  for (int i = 0; i < out.rows; ++i) {
    double sum = 0.0;
    for (int c = 0; c < d; ++c) sum += out.at(i, c);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("shape mismatches are rejected") {
  Matrix q(2, 4), k(3, 4), v(4, 4);
  CHECK_THROWS_AS(reference_attention(q, k, v), InputError);
  Matrix k2(3, 5);
  CHECK_THROWS_AS(reference_attention(q, k2, v), InputError);
}

TEST_CASE("undecomposed request reproduces the reference exactly") {
  std::vector<ToyAttentionInput> inputs{make_toy_input(21, 3, 6, 4)};
  const PackedLayout layout = pack(kv_lens_of(inputs), 1);
  const IndicatorMask mask = build_indicator(layout);
  const auto outputs = decomposed_attention(inputs, layout, mask);
  const Matrix expect = reference_attention(inputs[0].q, inputs[0].k, inputs[0].v);
  CHECK(max_abs_diff(outputs[0], expect) == 0.0);
}

TEST_CASE("request split across two rows stays within 1e-9") {
  // The long request wraps across both rows; the short one rides along.
  std::vector<ToyAttentionInput> inputs{make_toy_input(22, 3, 10, 4),
                                        make_toy_input(23, 3, 2, 4)};
  const PackedLayout layout = pack(kv_lens_of(inputs), 2);
  REQUIRE(layout.q_replica_rows[0] == 2);
  const IndicatorMask mask = build_indicator(layout);
  const auto outputs = decomposed_attention(inputs, layout, mask);
  for (int i = 0; i < 2; ++i) {
    const Matrix expect =
        reference_attention(inputs[i].q, inputs[i].k, inputs[i].v);
    CHECK(max_abs_diff(outputs[i], expect) <= 1e-9);
  }
}

TEST_CASE("mixed batch with padding matches per-request references") {
  std::vector<ToyAttentionInput> inputs{make_toy_input(31, 2, 9, 4),
                                        make_toy_input(32, 2, 4, 4),
                                        make_toy_input(33, 2, 3, 4)};
  const PackedLayout layout = pack(kv_lens_of(inputs), 2);
  const IndicatorMask mask = build_indicator(layout);
  const auto outputs = decomposed_attention(inputs, layout, mask);
  REQUIRE(outputs.size() == 3);
  for (int i = 0; i < 3; ++i) {
    const Matrix expect =
        reference_attention(inputs[i].q, inputs[i].k, inputs[i].v);
    CHECK(max_abs_diff(outputs[i], expect) <= 1e-9);
  }
}

TEST_CASE("mask and layout must agree") {
  std::vector<ToyAttentionInput> inputs{make_toy_input(41, 2, 5, 4),
                                        make_toy_input(42, 2, 5, 4)};
  const PackedLayout layout = pack(kv_lens_of(inputs), 2);
  IndicatorMask mask = build_indicator(layout);
  mask.cells[0] = 1 - mask.cells[0];  // flip one owner
  CHECK_THROWS_AS(decomposed_attention(inputs, layout, mask), ConsistencyError);
}

TEST_CASE("layout must tile every request") {
  std::vector<ToyAttentionInput> inputs{make_toy_input(51, 2, 5, 4)};
  PackedLayout layout = pack({4}, 1);  // one token short
  const IndicatorMask mask = build_indicator(layout);
  CHECK_THROWS_AS(decomposed_attention(inputs, layout, mask), ConsistencyError);
}

TEST_CASE("randomized packed batches match the oracle") {
  Rng rng(424242);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 6));
    std::vector<ToyAttentionInput> inputs;
    for (int i = 0; i < n; ++i) {
      inputs.push_back(make_toy_input(rng.next(),
                                      static_cast<int>(rng.uniform_int(1, 4)),
                                      static_cast<int>(rng.uniform_int(1, 12)),
                                      4));
    }
    const int width = static_cast<int>(rng.uniform_int(1, n));
    const PackedLayout layout = pack(kv_lens_of(inputs), width);
    const IndicatorMask mask = build_indicator(layout);
    const auto outputs = decomposed_attention(inputs, layout, mask);
    for (int i = 0; i < n; ++i) {
      const Matrix expect =
          reference_attention(inputs[i].q, inputs[i].k, inputs[i].v);
      CHECK(max_abs_diff(outputs[i], expect) <= 1e-9);
    }
  }
}
