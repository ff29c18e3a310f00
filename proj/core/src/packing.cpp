#include "specsim/packing.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "specsim/errors.hpp"

namespace specsim {

namespace {

// First-fit-decreasing placement at a fixed (width, L). Whole requests go
// to the first row with enough free space; oversized remainders wrap
// across rows in index order. Returns false if the tokens do not fit.
bool try_pack(const std::vector<int>& kv_lens, int width, int length,
              PackedLayout* out) {
  const int n = static_cast<int>(kv_lens.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return kv_lens[a] > kv_lens[b];
  });

  std::vector<int> fill(width, 0);
  std::vector<Segment> segments;
  for (int id : order) {
    const int len = kv_lens[id];
    int placed = -1;
    for (int r = 0; r < width; ++r) {
      if (length - fill[r] >= len) {
        placed = r;
        break;
      }
    }
    if (placed >= 0) {
      segments.push_back({id, placed, fill[placed], fill[placed] + len, 0});
      fill[placed] += len;
      continue;
    }
    // Split: walk rows in order, consuming whatever free space each has.
    int remaining = len;
    for (int r = 0; r < width && remaining > 0; ++r) {
      const int free = length - fill[r];
      if (free <= 0) continue;
      const int take = std::min(free, remaining);
      segments.push_back(
          {id, r, fill[r], fill[r] + take, len - remaining});
      fill[r] += take;
      remaining -= take;
    }
    if (remaining > 0) return false;
  }

  long long used = 0;
  for (int f : fill) used += f;
  out->length = length;
  out->width = width;
  out->segments = std::move(segments);
  out->padding_tokens = static_cast<long long>(width) * length - used;
  out->q_replica_rows.assign(n, 0);
  std::vector<std::vector<char>> seen(n, std::vector<char>(width, 0));
  for (const Segment& s : out->segments) {
    if (!seen[s.request_id][s.row]) {
      seen[s.request_id][s.row] = 1;
      ++out->q_replica_rows[s.request_id];
    }
  }
  return true;
}

}  // namespace

PackedLayout pack(const std::vector<int>& kv_lens, int width) {
  if (width < 1) {
    throw ConfigError("pack: width must be at least 1");
  }
  for (int len : kv_lens) {
    if (len < 1) throw ConfigError("pack: kv lengths must be at least 1");
  }
  PackedLayout layout;
  if (kv_lens.empty()) return layout;

  const int n = static_cast<int>(kv_lens.size());
  const int rows = std::min(width, n);
  long long total = 0;
  int max_len = 0;
  for (int len : kv_lens) {
    total += len;
    max_len = std::max(max_len, len);
  }

  // Padding grows with L, so the first feasible L is the minimizer. The
  // upper bound is loose on purpose; the search exits at the low end.
  const long long lo = (total + rows - 1) / rows;
  const long long hi = std::max<long long>(lo, std::max<long long>(max_len, total));
  for (long long length = lo; length <= hi; ++length) {
    if (try_pack(kv_lens, rows, static_cast<int>(length), &layout)) {
      return layout;
    }
  }
  throw ConsistencyError("pack: no feasible layout found");  // unreachable
}

long long naive_padding(const std::vector<int>& kv_lens) {
  if (kv_lens.empty()) {
    throw InputError("naive_padding: empty batch");
  }
  const int max_len = *std::max_element(kv_lens.begin(), kv_lens.end());
  long long padding = 0;
  for (int len : kv_lens) padding += max_len - len;
  return padding;
}

IndicatorMask build_indicator(const PackedLayout& layout) {
  IndicatorMask mask;
  mask.width = layout.width;
  mask.length = layout.length;
  mask.cells.assign(static_cast<std::size_t>(layout.width) * layout.length,
                    kEmptyCell);
  for (const Segment& s : layout.segments) {
    if (s.row < 0 || s.row >= layout.width || s.col_start < 0 ||
        s.col_end > layout.length || s.col_start >= s.col_end) {
      throw ConsistencyError("build_indicator: segment out of bounds");
    }
    for (int c = s.col_start; c < s.col_end; ++c) {
      if (mask.at(s.row, c) != kEmptyCell) {
        throw ConsistencyError("build_indicator: overlapping segments at row " +
                               std::to_string(s.row) + " col " +
                               std::to_string(c));
      }
      mask.at(s.row, c) = s.request_id;
    }
  }
  return mask;
}

}  // namespace specsim
