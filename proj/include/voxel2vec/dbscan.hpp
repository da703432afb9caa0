#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "voxel2vec/error.hpp"

namespace voxel2vec {

enum class distance_metric { cosine, euclidean };

inline std::string to_string(distance_metric m) { return m == distance_metric::cosine ? "cosine" : "euclidean"; }

inline distance_metric parse_metric(const std::string& s) {
  if (s == "cosine") return distance_metric::cosine;
  if (s == "euclidean") return distance_metric::euclidean;
  throw parameter_error("unknown metric '" + s + "' (expected cosine or euclidean)");
}

inline constexpr int noise_label = -1;

// n points of dimension d stored row-major.
struct point_set {
  std::size_t count = 0;
  std::size_t dimension = 0;
  std::vector<double> values;

  std::span<const double> operator[](std::size_t i) const { return {values.data() + i * dimension, dimension}; }
};

/// Pairwise distance under a metric. Cosine distance is 1 - cos; a zero vector has
/// cosine 0 with everything.
class distance_fn {
 public:
  distance_fn(const point_set& points, distance_metric metric) : points_(&points), metric_(metric) {
    if (metric_ == distance_metric::cosine) {
      norms_.resize(points.count);
      for (std::size_t i = 0; i < points.count; ++i) {
        double acc = 0.0;
        for (double v : points[i]) acc += v * v;
        norms_[i] = std::sqrt(acc);
      }
    }
  }

  double operator()(std::size_t a, std::size_t b) const {
    const auto x = (*points_)[a], y = (*points_)[b];
    if (metric_ == distance_metric::euclidean) {
      double acc = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
      return std::sqrt(acc);
    }
    if (norms_[a] == 0.0 || norms_[b] == 0.0) return 1.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    return 1.0 - acc / (norms_[a] * norms_[b]);
  }

 private:
  const point_set* points_;
  distance_metric metric_;
  std::vector<double> norms_;
};

/// Density-based clustering. A point is core when at least min_pts points (itself
/// included) lie within distance eps. Clusters are numbered from 0 in the order their
/// first core point appears; a border point joins the first cluster that reaches it.
/// Unreached points get noise_label.
inline std::vector<int> dbscan(const point_set& points, double eps, int min_pts, distance_metric metric) {
  detail::require(eps > 0.0, "dbscan: eps must be > 0");
  detail::require(min_pts >= 1, "dbscan: min_pts must be >= 1");
  detail::require(points.values.size() == points.count * points.dimension, "dbscan: point buffer size mismatch");
  const std::size_t n = points.count;
  const distance_fn dist(points, metric);

  auto neighbors = [&](std::size_t p) {
    std::vector<std::size_t> out;
    for (std::size_t q = 0; q < n; ++q)
      if (dist(p, q) <= eps || q == p) out.push_back(q);
    return out;
  };

  constexpr int unvisited = -2;
  std::vector<int> labels(n, unvisited);
  int next = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (labels[p] != unvisited) continue;
    auto seeds = neighbors(p);
    if (seeds.size() < static_cast<std::size_t>(min_pts)) {
      labels[p] = noise_label;
      continue;
    }
    const int cluster = next++;
    labels[p] = cluster;
    std::deque<std::size_t> queue(seeds.begin(), seeds.end());
    while (!queue.empty()) {
      const std::size_t q = queue.front();
      queue.pop_front();
      if (labels[q] == noise_label) labels[q] = cluster;
      if (labels[q] != unvisited) continue;
      labels[q] = cluster;
      auto more = neighbors(q);
      if (more.size() >= static_cast<std::size_t>(min_pts)) queue.insert(queue.end(), more.begin(), more.end());
    }
  }
  return labels;
}

}  // namespace voxel2vec
