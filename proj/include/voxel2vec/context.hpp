#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <vector>

#include "voxel2vec/error.hpp"
#include "voxel2vec/symbols.hpp"

namespace voxel2vec {

// A center symbol and the multiset of symbols in its context window.
struct training_pair {
  symbol_id center = 0;
  std::vector<symbol_id> context;
};

struct voxel_coord {
  std::size_t i = 0, j = 0, k = 0;
};

inline voxel_coord coord_of(const dims3& d, std::size_t index) {
  return {index % d.nx, (index / d.nx) % d.ny, index / (d.nx * d.ny)};
}

/// Appends the symbols of every in-bounds voxel within Chebyshev radius n of (i, j, k),
/// excluding the voxel itself, in z-major/x-fastest window order. Boundary voxels get
/// truncated windows.
inline void append_context(const symbol_volume& sv, voxel_coord v, int n, std::vector<symbol_id>& out) {
  const dims3& d = sv.dims();
  const auto ids = sv.ids();
  const auto lo = [n](std::size_t c) { return c >= static_cast<std::size_t>(n) ? c - n : std::size_t{0}; };
  const auto hi = [n](std::size_t c, std::size_t extent) { return std::min(c + n, extent - 1); };
  const std::size_t k0 = lo(v.k), k1 = hi(v.k, d.nz);
  const std::size_t j0 = lo(v.j), j1 = hi(v.j, d.ny);
  const std::size_t i0 = lo(v.i), i1 = hi(v.i, d.nx);
  for (std::size_t k = k0; k <= k1; ++k)
    for (std::size_t j = j0; j <= j1; ++j) {
      const std::size_t row = d.nx * (j + d.ny * k);
      for (std::size_t i = i0; i <= i1; ++i) {
        if (i == v.i && j == v.j && k == v.k) continue;
        out.push_back(ids[row + i]);
      }
    }
}

inline std::vector<symbol_id> context_of(const symbol_volume& sv, voxel_coord v, int n) {
  detail::require(n >= 1, "context_of: window radius must be >= 1");
  detail::require(sv.dims().contains(v.i, v.j, v.k), "context_of: voxel out of bounds");
  std::vector<symbol_id> out;
  append_context(sv, v, n, out);
  return out;
}

inline training_pair pair_at(const symbol_volume& sv, std::size_t index, int n) {
  training_pair p;
  p.center = sv[index];
  append_context(sv, coord_of(sv.dims(), index), n, p.context);
  return p;
}

}  // namespace voxel2vec
