#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "zono/linalg.hpp"

namespace zono {

/// Disjoint sorted index groups covering {0..d-1}.
struct Partition {
  std::vector<std::vector<std::size_t>> groups;

  std::size_t dim() const {
    std::size_t d = 0;
    for (const auto& g : groups) d += g.size();
    return d;
  }
};

inline void validate(const Partition& p, std::size_t d) {
  std::vector<char> seen(d, 0);
  for (const auto& g : p.groups) {
    if (g.empty()) throw std::invalid_argument("partition: empty group");
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g[i] >= d) throw std::invalid_argument("partition: index out of range");
      if (seen[g[i]]) throw std::invalid_argument("partition: duplicate index");
      seen[g[i]] = 1;
      if (i > 0 && g[i - 1] >= g[i]) throw std::invalid_argument("partition: group not sorted");
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    if (!seen[i]) throw std::invalid_argument("partition: index " + std::to_string(i) + " uncovered");
}

inline Partition singletons(std::size_t d) {
  if (d == 0) throw std::invalid_argument("singletons: d must be positive");
  Partition p;
  p.groups.reserve(d);
  for (std::size_t i = 0; i < d; ++i) p.groups.push_back({i});
  return p;
}

/// floor(d/2) pairs from a seeded shuffle; one singleton when d is odd.
inline Partition pairs_random(std::size_t d, std::uint64_t seed) {
  if (d == 0) throw std::invalid_argument("pairs_random: d must be positive");
  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (std::size_t i = d; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
  Partition p;
  for (std::size_t i = 0; i + 1 < d; i += 2) {
    std::vector<std::size_t> g{perm[i], perm[i + 1]};
    std::sort(g.begin(), g.end());
    p.groups.push_back(std::move(g));
  }
  if (d % 2 == 1) p.groups.push_back({perm[d - 1]});
  return p;
}

/// Greedy pairing by the |E|.|E|^T row-similarity score: scan rows in order,
/// pair each unassigned row with the unassigned partner of highest score
/// (ties toward the smallest index, which also covers all-zero rows).
inline Partition pairs_similarity(const Matrix& e) {
  const std::size_t d = e.rows();
  if (d == 0) throw std::invalid_argument("pairs_similarity: empty generator matrix");
  Matrix score(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < e.cols(); ++k) s += std::abs(e(i, k)) * std::abs(e(j, k));
      score(i, j) = score(j, i) = s;
    }
  std::vector<char> assigned(d, 0);
  Partition p;
  for (std::size_t i = 0; i < d; ++i) {
    if (assigned[i]) continue;
    std::size_t best = d;
    double best_score = -1.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (j == i || assigned[j]) continue;
      if (score(i, j) > best_score) {
        best_score = score(i, j);
        best = j;
      }
    }
    assigned[i] = 1;
    if (best == d) {
      p.groups.push_back({i});  // odd leftover
    } else {
      assigned[best] = 1;
      std::vector<std::size_t> g{i, best};
      std::sort(g.begin(), g.end());
      p.groups.push_back(std::move(g));
    }
  }
  return p;
}

namespace detail {

inline std::size_t fm_index(const std::array<std::size_t, 3>& shape, std::size_t ch, std::size_t y,
                            std::size_t x) {
  return (ch * shape[1] + y) * shape[2] + x;
}

/// Spatial pairing within one channel: (y,x)-(y,x+1) horizontally; when the
/// width is odd the last column pairs vertically with the next row, the
/// final leftover staying a singleton.
inline void pair_channel_spatial(const std::array<std::size_t, 3>& shape, std::size_t ch,
                                 Partition& p) {
  const std::size_t h = shape[1], w = shape[2];
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x + 1 < w; x += 2)
      p.groups.push_back({fm_index(shape, ch, y, x), fm_index(shape, ch, y, x + 1)});
  if (w % 2 == 1) {
    const std::size_t x = w - 1;
    for (std::size_t y = 0; y < h; y += 2) {
      if (y + 1 < h)
        p.groups.push_back({fm_index(shape, ch, y, x), fm_index(shape, ch, y + 1, x)});
      else
        p.groups.push_back({fm_index(shape, ch, y, x)});
    }
  }
}

}  // namespace detail

inline Partition pairs_spatial(const std::array<std::size_t, 3>& shape, std::size_t d) {
  if (shape[0] * shape[1] * shape[2] != d)
    throw std::invalid_argument("pairs_spatial: feature shape does not match width");
  Partition p;
  for (std::size_t ch = 0; ch < shape[0]; ++ch) detail::pair_channel_spatial(shape, ch, p);
  return p;
}

/// Pair channel 2k with 2k+1 at every spatial location; an odd channel count
/// leaves the last channel paired spatially instead.
inline Partition pairs_depthwise(const std::array<std::size_t, 3>& shape, std::size_t d) {
  if (shape[0] * shape[1] * shape[2] != d)
    throw std::invalid_argument("pairs_depthwise: feature shape does not match width");
  Partition p;
  const std::size_t hw = shape[1] * shape[2];
  for (std::size_t ch = 0; ch + 1 < shape[0]; ch += 2)
    for (std::size_t y = 0; y < shape[1]; ++y)
      for (std::size_t x = 0; x < shape[2]; ++x)
        p.groups.push_back(
            {detail::fm_index(shape, ch, y, x), detail::fm_index(shape, ch + 1, y, x)});
  if (shape[0] % 2 == 1 && hw > 0) detail::pair_channel_spatial(shape, shape[0] - 1, p);
  return p;
}

/// Greedily concatenates consecutive groups (in the given block order) while
/// the merged size stays within target_dim.
inline Partition merge_groups(const Partition& p, std::size_t target_dim,
                              const std::vector<std::size_t>& order = {}) {
  std::size_t max_group = 0;
  for (const auto& g : p.groups) max_group = std::max(max_group, g.size());
  if (target_dim < max_group)
    throw std::invalid_argument("merge_groups: target_dim below the largest existing group");
  std::vector<std::size_t> ord = order;
  if (ord.empty()) {
    ord.resize(p.groups.size());
    std::iota(ord.begin(), ord.end(), 0);
  }
  if (ord.size() != p.groups.size())
    throw std::invalid_argument("merge_groups: order length mismatch");
  Partition out;
  std::vector<std::size_t> cur;
  for (std::size_t gi : ord) {
    const auto& g = p.groups[gi];
    if (!cur.empty() && cur.size() + g.size() > target_dim) {
      std::sort(cur.begin(), cur.end());
      out.groups.push_back(std::move(cur));
      cur.clear();
    }
    cur.insert(cur.end(), g.begin(), g.end());
  }
  if (!cur.empty()) {
    std::sort(cur.begin(), cur.end());
    out.groups.push_back(std::move(cur));
  }
  return out;
}

}  // namespace zono
