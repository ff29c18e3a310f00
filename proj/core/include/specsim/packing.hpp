#pragma once

#include <vector>

namespace specsim {

inline constexpr int kEmptyCell = -1;

// One contiguous span of a request's KV tokens placed in a tensor row.
struct Segment {
  int request_id = 0;
  int row = 0;
  int col_start = 0;
  int col_end = 0;    // exclusive
  int token_offset = 0;  // index of the first token within its request

  int length() const { return col_end - col_start; }
};

// A packed KV tensor layout of `width` rows x `length` columns. Requests
// whose tokens did not fit a single row are decomposed into several
// segments; q_replica_rows counts, per request, how many distinct rows its
// query block must be replicated to.
struct PackedLayout {
  int length = 0;  // L
  int width = 0;   // B (rows actually used)
  std::vector<Segment> segments;
  long long padding_tokens = 0;
  std::vector<int> q_replica_rows;  // per request

  long long total_cells() const {
    return static_cast<long long>(length) * width;
  }
};

// Dense width x length grid recording which request owns each KV cell
// (kEmptyCell for padding).
struct IndicatorMask {
  int width = 0;
  int length = 0;
  std::vector<int> cells;  // row-major

  int at(int row, int col) const { return cells[row * length + col]; }
  int& at(int row, int col) { return cells[row * length + col]; }
};

// Packs the given per-request KV lengths into at most `width` rows,
// searching the tensor length L for the layout with the fewest padding
// tokens (ties broken by the smaller L). Requests are placed first-fit in
// decreasing length order; a request that fits no single row is split at
// row boundaries.
PackedLayout pack(const std::vector<int>& kv_lens, int width);

// Padding cost of the conventional one-row-per-request layout aligned to
// the longest request: sum of (max_len - len_i).
long long naive_padding(const std::vector<int>& kv_lens);

// Builds the ownership mask of a layout; throws if segments overlap.
IndicatorMask build_indicator(const PackedLayout& layout);

}  // namespace specsim
