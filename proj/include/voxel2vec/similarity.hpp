#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "voxel2vec/image.hpp"
#include "voxel2vec/matrix.hpp"
#include "voxel2vec/model.hpp"

namespace voxel2vec {

// Rows whose norm falls below this are treated as zero vectors.
inline constexpr double zero_norm = 1e-30;

/// Clamped cosine similarity max(cos(z_x, z_y), 0) between center vectors.
/// A zero-norm row has similarity 0 with everything, itself included.
template <class Real>
double similarity(const basic_embedding_model<Real>& m, symbol_id x, symbol_id y) {
  detail::require(x < m.symbols() && y < m.symbols(), "similarity: symbol out of range");
  const auto zx = m.center(x), zy = m.center(y);
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < zx.size(); ++i) {
    xy += static_cast<double>(zx[i]) * zy[i];
    xx += static_cast<double>(zx[i]) * zx[i];
    yy += static_cast<double>(zy[i]) * zy[i];
  }
  const double nx = std::sqrt(xx), ny = std::sqrt(yy);
  if (nx < zero_norm || ny < zero_norm) return 0.0;
  if (x == y) return 1.0;
  return std::clamp(xy / (nx * ny), 0.0, 1.0);
}

struct similarity_map {
  square_matrix values;
  std::vector<bool> zero_rows;  // symbols whose center vector has zero norm
};

template <class Real>
similarity_map compute_similarity_map(const basic_embedding_model<Real>& m) {
  const std::size_t n = m.symbols();
  similarity_map out{square_matrix(n), std::vector<bool>(n, false)};
  std::vector<double> norms(n);
  for (symbol_id s = 0; s < n; ++s) {
    double acc = 0.0;
    for (Real v : m.center(s)) acc += static_cast<double>(v) * v;
    norms[s] = std::sqrt(acc);
    out.zero_rows[s] = norms[s] < zero_norm;
  }
  for (symbol_id x = 0; x < n; ++x) {
    if (out.zero_rows[x]) continue;
    out.values(x, x) = 1.0;
    const auto zx = m.center(x);
    for (symbol_id y = x + 1; y < n; ++y) {
      if (out.zero_rows[y]) continue;
      const auto zy = m.center(y);
      double xy = 0.0;
      for (std::size_t i = 0; i < zx.size(); ++i) xy += static_cast<double>(zx[i]) * zy[i];
      const double v = std::clamp(xy / (norms[x] * norms[y]), 0.0, 1.0);
      out.values(x, y) = v;
      out.values(y, x) = v;
    }
  }
  return out;
}

inline std::vector<std::string> symbol_labels(const symbol_table* table, std::size_t n) {
  std::vector<std::string> labels(n);
  for (symbol_id s = 0; s < n; ++s) labels[s] = table ? table->word(s) : std::to_string(s);
  return labels;
}

struct heatmap_options {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t cell = 1;  // pixels per matrix cell, nearest-neighbour upscale
};

/// One cell per matrix entry, row i drawn as image row i.
inline rgb_image render_heatmap(const square_matrix& m, const heatmap_options& opt = {}) {
  detail::require(m.size() > 0, "render_heatmap: empty matrix");
  detail::require(opt.cell >= 1, "render_heatmap: cell size must be >= 1");
  rgb_image img(m.size() * opt.cell, m.size() * opt.cell);
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j)
      img.fill_rect(j * opt.cell, i * opt.cell, opt.cell, opt.cell, ramp_color(m(i, j), opt.lo, opt.hi));
  return img;
}

/// Small multiples: one heatmap per matrix laid out left to right in rows of `columns`.
inline rgb_image render_heatmap_grid(std::span<const square_matrix> matrices, std::size_t columns,
                                     const heatmap_options& opt = {}, std::size_t gap = 2) {
  detail::require(!matrices.empty(), "render_heatmap_grid: no matrices");
  columns = std::max<std::size_t>(1, std::min(columns, matrices.size()));
  std::size_t side = 0;
  for (const auto& m : matrices) side = std::max(side, m.size() * opt.cell);
  const std::size_t rows = (matrices.size() + columns - 1) / columns;
  rgb_image img(columns * side + (columns + 1) * gap, rows * side + (rows + 1) * gap);
  for (std::size_t idx = 0; idx < matrices.size(); ++idx) {
    const std::size_t x0 = gap + (idx % columns) * (side + gap);
    const std::size_t y0 = gap + (idx / columns) * (side + gap);
    const auto& m = matrices[idx];
    for (std::size_t i = 0; i < m.size(); ++i)
      for (std::size_t j = 0; j < m.size(); ++j)
        img.fill_rect(x0 + j * opt.cell, y0 + i * opt.cell, opt.cell, opt.cell, ramp_color(m(i, j), opt.lo, opt.hi));
  }
  return img;
}

inline void write_heatmap(const std::filesystem::path& path, const square_matrix& m, const heatmap_options& opt = {}) {
  write_png(path, render_heatmap(m, opt));
}

}  // namespace voxel2vec
