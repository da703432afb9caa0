#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "voxel2vec/config.hpp"
#include "voxel2vec/context.hpp"
#include "voxel2vec/error.hpp"
#include "voxel2vec/model.hpp"
#include "voxel2vec/symbols.hpp"

namespace voxel2vec {

// Uniform double in [0, 1) from the top 53 bits of one 64-bit draw.
template <class Rng>
double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Walker/Vose alias table: O(n) construction, O(1) draws from a fixed discrete law.
class alias_table {
 public:
  alias_table() = default;
  explicit alias_table(std::span<const double> weights) {
    const std::size_t n = weights.size();
    detail::require(n > 0, "alias_table: empty weight vector");
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    detail::require(total > 0.0, "alias_table: weights sum to zero");
    prob_.assign(n, 1.0);
    alias_.resize(n);
    std::iota(alias_.begin(), alias_.end(), 0u);

    std::vector<double> scaled(n);
    std::vector<std::uint32_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      detail::require(weights[i] >= 0.0, "alias_table: negative weight");
      scaled[i] = weights[i] * static_cast<double>(n) / total;
      (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
    }
    while (!small.empty() && !large.empty()) {
      const auto s = small.back();
      small.pop_back();
      const auto l = large.back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] -= 1.0 - scaled[s];
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    // Leftovers are 1 up to rounding.
    for (auto i : small) prob_[i] = 1.0;
    for (auto i : large) prob_[i] = 1.0;
  }

  std::size_t size() const { return prob_.size(); }

  template <class Rng>
  std::uint32_t sample(Rng& rng) const {
    const std::uint64_t r = rng();
    const auto bucket = static_cast<std::uint32_t>(((r >> 32) * prob_.size()) >> 32);
    const double coin = static_cast<double>(r & 0xffffffffu) * 0x1.0p-32;
    return coin < prob_[bucket] ? bucket : alias_[bucket];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

/// The static base law for negatives: unigram frequency raised to 3/4, normalized.
/// Read-only after construction and shared between workers.
class negative_distribution {
 public:
  negative_distribution() = default;
  explicit negative_distribution(std::span<const std::uint64_t> counts) : weights_(counts.size(), 0.0) {
    detail::require(!counts.empty(), "negative_distribution: no symbols");
    double total = 0.0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      weights_[s] = std::pow(static_cast<double>(counts[s]), 0.75);
      total += weights_[s];
      if (counts[s] > 0) ++support_;
    }
    detail::require(total > 0.0, "negative_distribution: all counts are zero");
    for (double& w : weights_) w /= total;
    table_ = alias_table(weights_);
  }

  std::size_t size() const { return weights_.size(); }
  double weight(symbol_id s) const { return weights_[s]; }
  std::span<const double> weights() const { return weights_; }
  std::size_t support() const { return support_; }  // symbols with nonzero weight

  template <class Rng>
  symbol_id sample(Rng& rng) const {
    return table_.sample(rng);
  }

 private:
  std::vector<double> weights_;
  std::size_t support_ = 0;
  alias_table table_;
};

/// Self-paced threshold t(eta) for batch counter eta and batch size B.
inline double self_paced_threshold(std::uint64_t eta, int batch_size, threshold_mode mode = threshold_mode::clamped_growth) {
  const double b = static_cast<double>(batch_size);
  const double e = static_cast<double>(eta);
  const double raw = 4.0 * e * e / (b * b) + 1.0 / b;
  return mode == threshold_mode::clamped_growth ? std::min(raw, 1.0) : std::max(raw, 1.0);
}

struct self_paced_state {
  std::uint64_t eta = 1;
  int batch_size = 1000;
  threshold_mode mode = threshold_mode::clamped_growth;

  double threshold() const { return self_paced_threshold(eta, batch_size, mode); }
  void advance() { ++eta; }
};

// Hard-negative filtering stays off until the threshold passes this value; with zero
// context vectors every candidate scores sigma(0) = 0.5 and would otherwise be filtered.
inline constexpr double warmup_threshold = 0.5;

enum class draw_status { ok, degenerate };

struct sampler_options {
  bool adaptive = true;        // exclude {c} and O from the negatives
  bool self_paced = true;      // threshold filtering plus informativeness weighting
  int negatives = 3;           // k
  int pool_factor = 8;         // pool m = pool_factor * k
  bool warmup_exemption = true;

  static sampler_options from(const train_config& cfg) {
    return {cfg.adaptive_negative_sampling, cfg.self_paced, cfg.negatives, cfg.pool_factor, true};
  }
};

/// Per-worker negative sampler.
///
/// With adaptive sampling, begin_pair() marks the center and its context as ineligible
/// for the rest of the pair. Without it, only the current positive is skipped, the usual
/// skip-gram convention. Draws come from the base law renormalized over the eligible set,
/// by rejection when the eligible mass is large and by explicit inversion otherwise.
///
/// With self-paced sampling, a pool of m candidates is drawn, candidates whose
/// informativeness sigma(zhat_w . z_c) reaches t(eta) are discarded, and k negatives are
/// drawn with replacement from the survivors with softmax(zhat_w . z_c) weights. If the
/// pool empties, every symbol is scored and the pool is redrawn from the eligible ones.
class negative_sampler {
 public:
  negative_sampler(const negative_distribution& dist, sampler_options options)
      : dist_(&dist), options_(options), stamp_(dist.size(), 0) {
    detail::require(options_.negatives >= 1 && options_.pool_factor >= 1, "negative_sampler: bad options");
  }

  const sampler_options& options() const { return options_; }

  void begin_pair(symbol_id center, std::span<const symbol_id> context) {
    next_epoch();
    excluded_mass_ = 0.0;
    excluded_support_ = 0;
    if (!options_.adaptive) return;
    exclude(center);
    for (symbol_id o : context) exclude(o);
  }

  bool is_excluded(symbol_id s) const { return stamp_[s] == epoch_; }

  /// Draws the negatives for positive `positive` of center `center` into out.
  /// Returns degenerate (and leaves out empty) when no symbol is eligible.
  template <class Real, class Rng>
  draw_status draw(const basic_embedding_model<Real>& m, symbol_id center, symbol_id positive, double threshold,
                   Rng& rng, std::vector<symbol_id>& out) {
    out.clear();
    if (!options_.adaptive) {
      // Only the positive is excluded, and only for this draw.
      next_epoch();
      excluded_mass_ = 0.0;
      excluded_support_ = 0;
      exclude(positive);
    }
    if (eligible_support() == 0) return draw_status::degenerate;
    const bool use_cdf = 1.0 - excluded_mass_ < 0.25;
    if (use_cdf && cdf_epoch_ != epoch_) build_cdf();

    const auto k = static_cast<std::size_t>(options_.negatives);
    if (!options_.self_paced) {
      for (std::size_t i = 0; i < k; ++i) out.push_back(base_draw(use_cdf, rng));
      return draw_status::ok;
    }

    const auto zc = m.center(center);
    const bool filtering = !options_.warmup_exemption || threshold > warmup_threshold;
    // Scores below the cutoff pass the threshold without evaluating the sigmoid.
    const double cutoff = threshold >= 1.0 ? 30.0 : std::log(threshold / (1.0 - threshold)) - 1e-6;
    const std::size_t pool_size = k * static_cast<std::size_t>(options_.pool_factor);
    pool_.clear();
    scores_.clear();
    for (std::size_t i = 0; i < pool_size; ++i) {
      const symbol_id w = base_draw(use_cdf, rng);
      const double s = dot<Real>(m.context(w), zc);
      if (filtering && s >= cutoff && sigmoid(s) >= threshold) continue;
      pool_.push_back(w);
      scores_.push_back(s);
    }
    if (pool_.empty() && !refill_pool_exhaustively(m, zc, threshold, filtering, pool_size, rng))
      return draw_status::degenerate;

    const double top = *std::max_element(scores_.begin(), scores_.end());
    weights_.resize(scores_.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores_.size(); ++i) total += weights_[i] = std::exp(scores_[i] - top);
    for (std::size_t n = 0; n < k; ++n) {
      double u = uniform01(rng) * total;
      std::size_t pick = 0;
      while (pick + 1 < weights_.size() && u >= weights_[pick]) u -= weights_[pick++];
      out.push_back(pool_[pick]);
    }
    return draw_status::ok;
  }

 private:
  void next_epoch() {
    if (++epoch_ == 0) {
      std::fill(stamp_.begin(), stamp_.end(), 0);
      epoch_ = 1;
    }
  }

  void exclude(symbol_id s) {
    if (stamp_[s] == epoch_) return;
    stamp_[s] = epoch_;
    const double w = dist_->weight(s);
    excluded_mass_ += w;
    if (w > 0.0) ++excluded_support_;
  }

  std::size_t eligible_support() const { return dist_->support() - excluded_support_; }

  void build_cdf() {
    cdf_symbols_.clear();
    cdf_.clear();
    double acc = 0.0;
    for (symbol_id s = 0; s < dist_->size(); ++s) {
      const double w = dist_->weight(s);
      if (w <= 0.0 || is_excluded(s)) continue;
      acc += w;
      cdf_symbols_.push_back(s);
      cdf_.push_back(acc);
    }
    cdf_epoch_ = epoch_;
  }

  template <class Rng>
  symbol_id base_draw(bool use_cdf, Rng& rng) {
    if (use_cdf) {
      const double u = uniform01(rng) * cdf_.back();
      const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
      return cdf_symbols_[std::min<std::size_t>(it - cdf_.begin(), cdf_.size() - 1)];
    }
    for (;;) {
      const symbol_id s = dist_->sample(rng);
      if (!is_excluded(s)) return s;
    }
  }

  template <class Real, class Rng>
  bool refill_pool_exhaustively(const basic_embedding_model<Real>& m, std::span<const Real> zc, double threshold,
                                bool filtering, std::size_t pool_size, Rng& rng) {
    std::vector<symbol_id> candidates;
    std::vector<double> candidate_scores, cdf;
    double acc = 0.0;
    for (symbol_id s = 0; s < dist_->size(); ++s) {
      const double w = dist_->weight(s);
      if (w <= 0.0 || is_excluded(s)) continue;
      const double score = dot<Real>(m.context(s), zc);
      if (filtering && sigmoid(score) >= threshold) continue;
      candidates.push_back(s);
      candidate_scores.push_back(score);
      cdf.push_back(acc += w);
    }
    if (candidates.empty()) return false;
    for (std::size_t i = 0; i < pool_size; ++i) {
      const auto it = std::upper_bound(cdf.begin(), cdf.end(), uniform01(rng) * acc);
      const std::size_t j = std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1);
      pool_.push_back(candidates[j]);
      scores_.push_back(candidate_scores[j]);
    }
    return true;
  }

  const negative_distribution* dist_;
  sampler_options options_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
  std::uint32_t cdf_epoch_ = std::numeric_limits<std::uint32_t>::max();
  double excluded_mass_ = 0.0;
  std::size_t excluded_support_ = 0;
  std::vector<symbol_id> cdf_symbols_;
  std::vector<double> cdf_;
  std::vector<symbol_id> pool_;
  std::vector<double> scores_;
  std::vector<double> weights_;
};

/// Probability that a voxel whose center symbol has `count` occurrences out of `total`
/// is kept by frequency subsampling: min(1, sqrt(rho * T / count)).
inline double keep_probability(std::uint64_t count, std::uint64_t total, double rho) {
  if (count == 0) return 0.0;
  return std::min(1.0, std::sqrt(rho * static_cast<double>(total) / static_cast<double>(count)));
}

struct epoch_plan {
  std::vector<std::uint32_t> voxels;  // center voxel indices, in visiting order
  std::size_t forced = 0;             // trailing entries added by the per-symbol floor
};

/// One epoch of center voxels: a seeded permutation of all voxels thinned by frequency
/// subsampling, followed by a shuffled tail of extra draws (with replacement) for every
/// symbol that fell short of `min_per_symbol` visits.
template <class Rng>
epoch_plan plan_epoch(const symbol_volume& sv, double rho, int min_per_symbol, Rng& rng) {
  detail::require(sv.size() < std::numeric_limits<std::uint32_t>::max(), "plan_epoch: volume too large");
  const auto counts = symbol_counts(sv);
  const std::uint64_t total = sv.size();
  std::vector<double> keep(counts.size());
  for (std::size_t s = 0; s < counts.size(); ++s) keep[s] = keep_probability(counts[s], total, rho);

  std::vector<std::uint32_t> order(sv.size());
  std::iota(order.begin(), order.end(), 0u);
  std::shuffle(order.begin(), order.end(), rng);

  epoch_plan plan;
  plan.voxels.reserve(order.size());
  std::vector<std::uint64_t> kept(counts.size(), 0);
  for (auto v : order) {
    const symbol_id s = sv[v];
    if (keep[s] >= 1.0 || uniform01(rng) < keep[s]) {
      plan.voxels.push_back(v);
      ++kept[s];
    }
  }

  const auto floor = static_cast<std::uint64_t>(min_per_symbol);
  std::vector<std::vector<std::uint32_t>> members(counts.size());
  bool any_short = false;
  for (std::size_t s = 0; s < counts.size(); ++s) any_short |= counts[s] > 0 && kept[s] < floor;
  if (!any_short) return plan;
  for (std::uint32_t v = 0; v < sv.size(); ++v) {
    const symbol_id s = sv[v];
    if (counts[s] > 0 && kept[s] < floor) members[s].push_back(v);
  }
  const std::size_t head = plan.voxels.size();
  for (std::size_t s = 0; s < counts.size(); ++s) {
    for (std::uint64_t n = kept[s]; n < floor && !members[s].empty(); ++n) {
      const auto pick = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(members[s].size()));
      plan.voxels.push_back(members[s][std::min(pick, members[s].size() - 1)]);
    }
  }
  std::shuffle(plan.voxels.begin() + static_cast<std::ptrdiff_t>(head), plan.voxels.end(), rng);
  plan.forced = plan.voxels.size() - head;
  return plan;
}

}  // namespace voxel2vec
