#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "voxel2vec/image.hpp"
#include "voxel2vec/tsne.hpp"

namespace voxel2vec {

struct disc {
  point2 center{0.0, 0.0};
  double radius = 0.0;
};

struct overlap_report {
  int iterations = 0;
  bool resolved = true;  // false when the iteration cap was reached with overlaps left
};

inline bool discs_overlap(const disc& a, const disc& b) {
  return std::hypot(a.center[0] - b.center[0], a.center[1] - b.center[1]) < a.radius + b.radius;
}

/// Pushes overlapping pairs apart along their center line, each by half the overlap,
/// until no pair overlaps or max_iterations sweeps have run. Coincident centers separate
/// along a fixed angle derived from the pair indices.
inline overlap_report resolve_overlaps(std::span<disc> discs, int max_iterations = 500) {
  overlap_report report;
  const std::size_t n = discs.size();
  for (; report.iterations < max_iterations; ++report.iterations) {
    bool moved = false;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        auto& a = discs[i];
        auto& b = discs[j];
        const double need = a.radius + b.radius;
        double dx = b.center[0] - a.center[0], dy = b.center[1] - a.center[1];
        const double d = std::hypot(dx, dy);
        if (d >= need) continue;
        if (d == 0.0) {
          const double angle = std::numbers::pi * (std::sqrt(5.0) - 1.0) * static_cast<double>(i * n + j);
          dx = std::cos(angle);
          dy = std::sin(angle);
        } else {
          dx /= d;
          dy /= d;
        }
        const double push = 0.5 * (need - d) + 1e-9 * need;
        a.center = {a.center[0] - push * dx, a.center[1] - push * dy};
        b.center = {b.center[0] + push * dx, b.center[1] + push * dy};
        moved = true;
      }
    if (!moved) return report;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (discs_overlap(discs[i], discs[j])) report.resolved = false;
  return report;
}

/// Radius proportional to sqrt(weight / max weight), scaled to a fraction of the layout extent.
inline std::vector<double> area_radii(std::span<const double> weights, std::span<const point2> positions,
                                      double fraction = 0.05) {
  double extent = 0.0;
  for (const auto& a : positions)
    for (const auto& b : positions) extent = std::max({extent, std::abs(a[0] - b[0]), std::abs(a[1] - b[1])});
  if (extent == 0.0) extent = 1.0;
  const double top = weights.empty() ? 0.0 : *std::max_element(weights.begin(), weights.end());
  std::vector<double> radii(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i)
    radii[i] = top > 0.0 ? fraction * extent * std::sqrt(weights[i] / top) : fraction * extent;
  return radii;
}

struct scatter_item {
  disc shape;
  rgb color{0, 0, 0};
  std::string label;
};

// Fits all discs into a square image with a margin and draws them in order.
inline rgb_image render_scatter(std::span<const scatter_item> items, std::size_t size = 512) {
  rgb_image img(size, size);
  if (items.empty()) return img;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& it : items) {
    x0 = std::min(x0, it.shape.center[0] - it.shape.radius);
    x1 = std::max(x1, it.shape.center[0] + it.shape.radius);
    y0 = std::min(y0, it.shape.center[1] - it.shape.radius);
    y1 = std::max(y1, it.shape.center[1] + it.shape.radius);
  }
  const double span = std::max({x1 - x0, y1 - y0, 1e-12});
  const double margin = 0.08 * static_cast<double>(size);
  const double scale = (static_cast<double>(size) - 2.0 * margin) / span;
  const double ox = margin + 0.5 * (span - (x1 - x0)) * scale, oy = margin + 0.5 * (span - (y1 - y0)) * scale;
  for (const auto& it : items) {
    const double cx = ox + (it.shape.center[0] - x0) * scale;
    const double cy = oy + (y1 - it.shape.center[1]) * scale;
    img.fill_disc(cx, cy, std::max(1.5, it.shape.radius * scale), it.color);
    if (!it.label.empty() && cx >= 0 && cy >= 0)
      draw_text(img, static_cast<std::size_t>(cx), static_cast<std::size_t>(cy) + 2, it.label, {0, 0, 0}, 1);
  }
  return img;
}

}  // namespace voxel2vec
