#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "voxel2vec/dbscan.hpp"
#include "voxel2vec/error.hpp"
#include "voxel2vec/matrix.hpp"

namespace voxel2vec {

using point2 = std::array<double, 2>;

struct tsne_options {
  double perplexity = 5.0;
  int iterations = 1000;
  std::uint64_t seed = 1;
  double learning_rate = 200.0;
  double exaggeration = 12.0;
  int exaggeration_iterations = 250;  // capped at a quarter of the run
};

struct tsne_result {
  std::vector<point2> positions;
  std::vector<double> kl_history;  // KL divergence after each iteration
  std::size_t monitored_from = 0;  // first iteration of the monotone phase
};

namespace detail {

// Row-conditional affinities at the requested perplexity, symmetrized and normalized.
inline std::vector<double> joint_affinities(const square_matrix& sq_dist, double perplexity) {
  const std::size_t n = sq_dist.size();
  const double target = std::log(perplexity);
  std::vector<double> p(n * n, 0.0);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    for (int step = 0; step < 200; ++step) {
      double sum = 0.0, weighted = 0.0;
      double dmin = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) dmin = std::min(dmin, sq_dist(i, j));
      for (std::size_t j = 0; j < n; ++j) {
        row[j] = j == i ? 0.0 : std::exp(-beta * (sq_dist(i, j) - dmin));
        sum += row[j];
        weighted += row[j] * (sq_dist(i, j) - dmin);
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-6) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = (beta + lo) / 2.0;
      }
    }
    for (std::size_t j = 0; j < n; ++j) p[i * n + j] = row[j];
  }
  std::vector<double> joint(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      joint[i * n + j] = std::max((p[i * n + j] + p[j * n + i]) / (2.0 * n), 1e-300);
  return joint;
}

// Student-t kernel numerators and their sum.
inline double low_dim_kernel(const std::vector<point2>& y, std::vector<double>& num) {
  const std::size_t n = y.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        num[i * n + j] = 0.0;
        continue;
      }
      const double dx = y[i][0] - y[j][0], dy = y[i][1] - y[j][1];
      num[i * n + j] = 1.0 / (1.0 + dx * dx + dy * dy);
      sum += num[i * n + j];
    }
  return sum;
}

inline double kl_divergence(const std::vector<double>& p, const std::vector<point2>& y) {
  const std::size_t n = y.size();
  std::vector<double> num(n * n);
  const double sum = low_dim_kernel(y, num);
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double q = std::max(num[i * n + j] / sum, 1e-300);
      kl += p[i * n + j] * std::log(p[i * n + j] / q);
    }
  return kl;
}

inline void kl_gradient(const std::vector<double>& p, const std::vector<point2>& y, double exaggeration,
                        std::vector<point2>& grad) {
  const std::size_t n = y.size();
  std::vector<double> num(n * n);
  const double sum = low_dim_kernel(y, num);
  for (std::size_t i = 0; i < n; ++i) {
    grad[i] = {0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double w = 4.0 * (exaggeration * p[i * n + j] - num[i * n + j] / sum) * num[i * n + j];
      grad[i][0] += w * (y[i][0] - y[j][0]);
      grad[i][1] += w * (y[i][1] - y[j][1]);
    }
  }
}

}  // namespace detail

/// Exact t-SNE from a matrix of squared pairwise distances.
///
/// The first half of the run is the usual momentum descent with gains and early
/// exaggeration. The second half is plain gradient descent with step halving: a step is
/// kept only if it does not increase the KL divergence, so kl_history is non-increasing
/// from monitored_from onward.
inline tsne_result tsne_from_squared_distances(const square_matrix& sq_dist, const tsne_options& opt = {}) {
  detail::require(opt.perplexity > 0.0, "tsne: perplexity must be > 0");
  detail::require(opt.iterations >= 0, "tsne: iterations must be >= 0");
  const std::size_t n = sq_dist.size();
  tsne_result out;
  out.positions.assign(n, {0.0, 0.0});
  if (n < 2) return out;

  // Small inputs cannot support a large perplexity.
  const double perplexity = std::min(opt.perplexity, std::max(1.0, (static_cast<double>(n) - 1.0) / 3.0));
  const auto p = detail::joint_affinities(sq_dist, perplexity);

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1e-2);
  for (auto& pt : out.positions) pt = {normal(rng), normal(rng)};

  const int total = opt.iterations;
  const int descent_end = total / 2;
  const int exaggerate_end = std::min(opt.exaggeration_iterations, total / 4);
  out.monitored_from = static_cast<std::size_t>(descent_end);

  auto& y = out.positions;
  std::vector<point2> grad(n), velocity(n, {0.0, 0.0}), gains(n, {1.0, 1.0});
  for (int it = 0; it < descent_end; ++it) {
    const double ex = it < exaggerate_end ? opt.exaggeration : 1.0;
    const double momentum = it < exaggerate_end ? 0.5 : 0.8;
    detail::kl_gradient(p, y, ex, grad);
    for (std::size_t i = 0; i < n; ++i)
      for (int a = 0; a < 2; ++a) {
        const bool same_sign = (grad[i][a] > 0) == (velocity[i][a] > 0);
        gains[i][a] = std::max(same_sign ? gains[i][a] * 0.8 : gains[i][a] + 0.2, 0.01);
        velocity[i][a] = momentum * velocity[i][a] - opt.learning_rate * gains[i][a] * grad[i][a];
        y[i][a] += velocity[i][a];
      }
    out.kl_history.push_back(detail::kl_divergence(p, y));
  }

  double kl = detail::kl_divergence(p, y);
  double step = opt.learning_rate;
  std::vector<point2> trial(n);
  for (int it = descent_end; it < total; ++it) {
    detail::kl_gradient(p, y, 1.0, grad);
    bool accepted = false;
    for (int tries = 0; tries < 40 && !accepted; ++tries) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = {y[i][0] - step * grad[i][0], y[i][1] - step * grad[i][1]};
      const double candidate = detail::kl_divergence(p, trial);
      if (candidate <= kl) {
        y.swap(trial);
        kl = candidate;
        accepted = true;
        step *= 1.2;
      } else {
        step *= 0.5;
      }
    }
    if (!accepted) step = opt.learning_rate;
    out.kl_history.push_back(kl);
  }

  // Center the layout.
  point2 mean{0.0, 0.0};
  for (const auto& pt : y) mean = {mean[0] + pt[0] / n, mean[1] + pt[1] / n};
  for (auto& pt : y) pt = {pt[0] - mean[0], pt[1] - mean[1]};
  return out;
}

inline tsne_result tsne_from_points(const point_set& points, const tsne_options& opt = {}) {
  square_matrix sq(points.count);
  for (std::size_t i = 0; i < points.count; ++i)
    for (std::size_t j = i + 1; j < points.count; ++j) {
      double acc = 0.0;
      for (std::size_t a = 0; a < points.dimension; ++a) acc += (points[i][a] - points[j][a]) * (points[i][a] - points[j][a]);
      sq(i, j) = sq(j, i) = acc;
    }
  return tsne_from_squared_distances(sq, opt);
}

/// Exact t-SNE on a precomputed distance matrix; entries are squared before use.
inline tsne_result tsne_from_distances(const square_matrix& dist, const tsne_options& opt = {}) {
  square_matrix sq(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i)
    for (std::size_t j = 0; j < dist.size(); ++j) sq(i, j) = dist(i, j) * dist(i, j);
  return tsne_from_squared_distances(sq, opt);
}

}  // namespace voxel2vec
