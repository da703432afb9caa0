#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "voxel2vec/config.hpp"
#include "voxel2vec/context.hpp"
#include "voxel2vec/model.hpp"
#include "voxel2vec/sampler.hpp"
#include "voxel2vec/symbols.hpp"

namespace voxel2vec {

struct training_log {
  std::uint64_t pairs_seen = 0;       // center voxels processed
  std::uint64_t positives_seen = 0;   // (center, context) positive pairs
  std::uint64_t degenerate_draws = 0; // positives that got no negatives
  std::uint64_t forced_pairs = 0;     // pairs added by the per-symbol floor
  std::uint64_t final_eta = 1;
  std::vector<double> objective_trace;  // mean per-pair objective per block of 10^4 pairs
  bool degenerate_vocabulary = false;
  std::vector<std::string> warnings;
};

struct training_result {
  embedding_model model;
  training_log log;
};

inline constexpr std::uint64_t objective_block = 10'000;

namespace detail {

// Independent, reproducible streams derived from the run seed.
inline std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t purpose, std::uint64_t worker = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(worker)};
  return std::mt19937_64(seq);
}

enum rng_purpose : std::uint64_t { init_stream = 1, epoch_stream = 2, negative_stream = 3 };

struct worker_stats {
  std::uint64_t pairs = 0;
  std::uint64_t positives = 0;
  std::uint64_t degenerate = 0;
  double block_sum = 0.0;
  std::uint64_t block_count = 0;
  std::vector<double> trace;
};

// Processes plan[begin, end). `processed` counts pairs across all workers and drives eta.
template <class Rng>
void run_shard(embedding_model& model, const symbol_volume& sv, const train_config& cfg,
               const negative_distribution& dist, std::span<const std::uint32_t> plan,
               std::atomic<std::uint64_t>& processed, std::uint64_t eta_base, Rng& rng, worker_stats& stats) {
  negative_sampler sampler(dist, sampler_options::from(cfg));
  const step_params params = step_params_from(cfg);
  std::vector<float> scratch(model.dimension());
  std::vector<symbol_id> context, negatives;
  context.reserve(static_cast<std::size_t>(std::pow(2 * cfg.context_window + 1, 3)));

  for (std::uint32_t voxel : plan) {
    const std::uint64_t done = processed.fetch_add(1, std::memory_order_relaxed);
    const std::uint64_t eta = eta_base + done / static_cast<std::uint64_t>(cfg.batch_size);
    const double threshold = self_paced_threshold(eta, cfg.batch_size, cfg.threshold);

    const symbol_id center = sv[voxel];
    context.clear();
    append_context(sv, coord_of(sv.dims(), voxel), cfg.context_window, context);
    sampler.begin_pair(center, context);

    double pair_objective = 0.0;
    for (symbol_id o : context) {
      if (sampler.draw(model, center, o, threshold, rng, negatives) == draw_status::degenerate) ++stats.degenerate;
      pair_objective += update_positive<float>(model, center, o, negatives, params, scratch);
    }
    stats.positives += context.size();
    ++stats.pairs;
    stats.block_sum += pair_objective;
    if (++stats.block_count == objective_block) {
      stats.trace.push_back(stats.block_sum / static_cast<double>(objective_block));
      stats.block_sum = 0.0;
      stats.block_count = 0;
    }
  }
}

}  // namespace detail

/// Trains center and context vectors on one symbol volume.
///
/// Each epoch visits a subsampled permutation of the voxels. Every visited voxel is one
/// training pair; the self-paced batch counter eta advances every batch_size pairs.
/// With cfg.threads == 1 the run is single-writer and bit-reproducible for a fixed seed.
/// With more threads the plan is split into shards whose workers update the shared
/// matrices without locking, so results vary from run to run.
inline training_result train(const symbol_volume& sv, const train_config& cfg) {
  cfg.validate();
  const std::size_t symbols = sv.symbol_count();
  auto init_rng = detail::derived_rng(cfg.seed, detail::init_stream);
  training_result result{init_model<float>(symbols, static_cast<std::size_t>(cfg.dimension), init_rng), {}};
  result.model.set_table(sv.table_ptr());

  if (symbols < 2) {
    result.log.degenerate_vocabulary = true;
    result.log.warnings.push_back("vocabulary has a single symbol; returning the initialized model");
    result.model.set_epochs_trained(static_cast<std::uint64_t>(cfg.epochs));
    return result;
  }

  const auto counts = symbol_counts(sv);
  const negative_distribution dist(counts);
  auto epoch_rng = detail::derived_rng(cfg.seed, detail::epoch_stream);
  std::atomic<std::uint64_t> processed{0};
  const auto threads = static_cast<std::size_t>(cfg.threads);

  std::vector<detail::worker_stats> stats(threads);
  std::vector<std::mt19937_64> rngs;
  for (std::size_t w = 0; w < threads; ++w) rngs.push_back(detail::derived_rng(cfg.seed, detail::negative_stream, w));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const epoch_plan plan = plan_epoch(sv, cfg.subsample_threshold, cfg.min_samples_per_symbol, epoch_rng);
    result.log.forced_pairs += plan.forced;
    const std::span<const std::uint32_t> voxels = plan.voxels;
    if (threads == 1) {
      detail::run_shard(result.model, sv, cfg, dist, voxels, processed, 1, rngs[0], stats[0]);
    } else {
      std::vector<std::thread> pool;
      const std::size_t shard = (voxels.size() + threads - 1) / threads;
      for (std::size_t w = 0; w < threads; ++w) {
        const std::size_t begin = std::min(voxels.size(), w * shard);
        const std::size_t end = std::min(voxels.size(), begin + shard);
        pool.emplace_back([&, w, begin, end] {
          detail::run_shard(result.model, sv, cfg, dist, voxels.subspan(begin, end - begin), processed, 1, rngs[w],
                            stats[w]);
        });
      }
      for (auto& t : pool) t.join();
    }
    result.model.set_epochs_trained(result.model.epochs_trained() + 1);
  }

  for (const auto& s : stats) {
    result.log.pairs_seen += s.pairs;
    result.log.positives_seen += s.positives;
    result.log.degenerate_draws += s.degenerate;
    result.log.objective_trace.insert(result.log.objective_trace.end(), s.trace.begin(), s.trace.end());
  }
  result.log.final_eta = 1 + processed.load() / static_cast<std::uint64_t>(cfg.batch_size);
  if (!result.model.all_finite()) throw invariant_error("train: non-finite embedding entries");
  return result;
}

}  // namespace voxel2vec
