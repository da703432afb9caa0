#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "voxel2vec/context.hpp"
#include "voxel2vec/layout.hpp"
#include "voxel2vec/matrix.hpp"
#include "voxel2vec/model.hpp"
#include "voxel2vec/similarity.hpp"
#include "voxel2vec/symbols.hpp"
#include "voxel2vec/trainer.hpp"
#include "voxel2vec/tsne.hpp"

namespace voxel2vec {

/// Members of a time series or ensemble sharing one symbol table and grid.
struct volume_collection {
  std::shared_ptr<const symbol_table> table;
  std::vector<symbol_volume> volumes;
  std::vector<std::string> labels;
  std::vector<std::optional<embedding_model>> models;

  std::size_t size() const { return volumes.size(); }
};

/// Quantizes every member with bounds shared across the collection (one range per
/// variable) and symbolizes them against a single table.
/// members[m][v] is variable v of member m.
inline volume_collection make_collection(std::span<const std::vector<volume>> members, int level_count,
                                         std::vector<std::string> labels = {}) {
  detail::require(!members.empty(), "make_collection: no members");
  const std::size_t vars = members.front().size();
  detail::require(vars >= 1, "make_collection: members need at least one variable");
  std::vector<value_range> bounds(vars);
  for (std::size_t v = 0; v < vars; ++v) {
    std::vector<volume> column;
    for (const auto& m : members) {
      detail::require(m.size() == vars, "make_collection: members differ in variable count");
      column.push_back(m[v]);
    }
    bounds[v] = global_range(column);
  }
  std::vector<std::vector<quantized_volume>> quantized;
  for (const auto& m : members) {
    std::vector<quantized_volume> q;
    for (std::size_t v = 0; v < vars; ++v) q.push_back(quantize(m[v], level_count, bounds[v]));
    quantized.push_back(std::move(q));
  }
  auto sym = symbolize_collection(quantized);
  if (labels.empty())
    for (std::size_t i = 0; i < members.size(); ++i) labels.push_back(std::to_string(i));
  detail::require(labels.size() == members.size(), "make_collection: one label per member required");
  volume_collection out{sym.table, std::move(sym.volumes), std::move(labels), {}};
  out.models.resize(out.volumes.size());
  return out;
}

// Seed for member m, derived from the run seed.
inline std::uint64_t member_seed(std::uint64_t seed, std::size_t member) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 4u,
                    static_cast<std::uint32_t>(member)};
  std::mt19937_64 rng(seq);
  return rng();
}

// Trains one model per member with identical settings and per-member seeds.
inline void train_collection(volume_collection& c, const train_config& cfg) {
  c.models.resize(c.size());
  for (std::size_t m = 0; m < c.size(); ++m) {
    train_config member = cfg;
    member.seed = member_seed(cfg.seed, m);
    c.models[m] = train(c.volumes[m], member).model;
  }
}

struct transfer_options {
  int context_window = 1;
  prediction_scoring scoring = prediction_scoring::as_printed;
  int threads = 1;  // results do not depend on the thread count
};

namespace detail {

// In-place sum over the window [i - n, i + n] along one axis of a x-fastest grid, truncated at the borders.
inline void box_pass(std::vector<double>& f, std::vector<double>& line, const dims3& d, int axis, int n) {
  const std::size_t len = axis == 0 ? d.nx : axis == 1 ? d.ny : d.nz;
  const std::size_t stride = axis == 0 ? 1 : axis == 1 ? d.nx : d.nx * d.ny;
  const std::size_t lines = d.count() / len;
  line.resize(len + 1);
  for (std::size_t l = 0; l < lines; ++l) {
    // Start of line l: enumerate the coordinates orthogonal to `axis`.
    std::size_t base;
    if (axis == 0) base = l * d.nx;
    else if (axis == 1) base = (l / d.nx) * d.nx * d.ny + l % d.nx;
    else base = l;
    line[0] = 0.0;
    for (std::size_t i = 0; i < len; ++i) line[i + 1] = line[i] + f[base + i * stride];
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t lo = i >= static_cast<std::size_t>(n) ? i - n : 0;
      const std::size_t hi = std::min(len, i + n + 1);
      f[base + i * stride] = line[hi] - line[lo];
    }
  }
}

}  // namespace detail

/// Predicts every voxel of `target` from its context using `model`: the predicted symbol
/// maximizes the mean over context symbols of the model's sigmoid score, ties going to
/// the lowest id.
///
/// For each candidate the context sum is a separable box sum of the candidate's score
/// field minus the center term, which costs a few operations per voxel instead of one
/// per neighbor. The per-voxel mean divides every candidate by the same context size and
/// is skipped.
template <class Real>
symbol_volume transfer_predict(const basic_embedding_model<Real>& model, const symbol_volume& target,
                               const transfer_options& opt = {}) {
  detail::require(target.size() > 1, "transfer_predict: single-voxel volumes have no context");
  detail::require(model.symbols() == target.symbol_count(), "transfer_predict: model and volume use different tables");
  detail::require(opt.context_window >= 1, "transfer_predict: context window must be >= 1");
  detail::require(opt.threads >= 1, "transfer_predict: threads must be >= 1");
  const std::size_t n = model.symbols();
  const std::size_t T = target.size();
  const dims3 dims = target.dims();

  // score[s * n + o]: sigmoid score of candidate s given context symbol o.
  std::vector<double> score(n * n);
  for (symbol_id s = 0; s < n; ++s)
    for (symbol_id o = 0; o < n; ++o) {
      const double x = opt.scoring == prediction_scoring::as_printed ? dot<Real>(model.context(s), model.center(o))
                                                                     : dot<Real>(model.context(o), model.center(s));
      score[s * n + o] = sigmoid(x);
    }

  // Candidates [begin, end) scanned in increasing order; strict improvement keeps the lowest id on ties.
  auto scan = [&](symbol_id begin, symbol_id end, std::vector<double>& best, std::vector<symbol_id>& arg) {
    std::vector<double> field(T), line;
    best.assign(T, -1.0);
    arg.assign(T, 0);
    for (symbol_id s = begin; s < end; ++s) {
      const double* row = score.data() + static_cast<std::size_t>(s) * n;
      for (std::size_t v = 0; v < T; ++v) field[v] = row[target[v]];
      for (int axis = 0; axis < 3; ++axis) detail::box_pass(field, line, dims, axis, opt.context_window);
      for (std::size_t v = 0; v < T; ++v) {
        const double p = field[v] - row[target[v]];
        if (p > best[v]) {
          best[v] = p;
          arg[v] = s;
        }
      }
    }
  };

  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(opt.threads), n);
  std::vector<std::vector<double>> best(threads);
  std::vector<std::vector<symbol_id>> arg(threads);
  if (threads == 1) {
    scan(0, static_cast<symbol_id>(n), best[0], arg[0]);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const auto b = static_cast<symbol_id>(std::min(n, t * chunk)), e = static_cast<symbol_id>(std::min(n, (t + 1) * chunk));
      pool.emplace_back(scan, b, e, std::ref(best[t]), std::ref(arg[t]));
    }
    for (auto& t : pool) t.join();
    for (std::size_t t = 1; t < threads; ++t)
      for (std::size_t v = 0; v < T; ++v)
        if (best[t][v] > best[0][v]) {
          best[0][v] = best[t][v];
          arg[0][v] = arg[t][v];
        }
  }
  return symbol_volume(dims, std::move(arg[0]), target.table_ptr());
}

// Fraction of voxels whose symbols agree.
inline double prediction_similarity(const symbol_volume& a, const symbol_volume& b) {
  if (!(a.dims() == b.dims()))
    throw parameter_error("prediction_similarity: dims differ " + to_string(a.dims()) + " vs " + to_string(b.dims()));
  std::size_t same = 0;
  for (std::size_t v = 0; v < a.size(); ++v) same += a[v] == b[v];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

inline const embedding_model& trained_model(const volume_collection& c, std::size_t i) {
  detail::require(i < c.size(), "association: member index out of range");
  if (!c.models[i] || c.models[i]->epochs_trained() == 0)
    throw parameter_error("association: member " + c.labels[i] + " has no trained model");
  return *c.models[i];
}

/// Mean of the two directional transfer accuracies between members i and j.
inline double association(const volume_collection& c, std::size_t i, std::size_t j, const transfer_options& opt = {}) {
  const auto& mi = trained_model(c, i);
  const auto& mj = trained_model(c, j);
  const double ij = prediction_similarity(c.volumes[i], transfer_predict(mj, c.volumes[i], opt));
  if (i == j) return ij;
  const double ji = prediction_similarity(c.volumes[j], transfer_predict(mi, c.volumes[j], opt));
  return (ij + ji) / 2.0;
}

/// All pairs i <= j, mirrored. Pairs run as independent jobs on opt.threads workers; each
/// prediction runs single-threaded so the matrix is identical for any thread count.
inline square_matrix association_matrix(const volume_collection& c, const transfer_options& opt = {}) {
  const std::size_t m = c.size();
  for (std::size_t i = 0; i < m; ++i) trained_model(c, i);
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) jobs.emplace_back(i, j);
  square_matrix out(m);
  transfer_options single = opt;
  single.threads = 1;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < jobs.size();) {
      const auto [i, j] = jobs[k];
      const double a = association(c, i, j, single);
      out(i, j) = a;
      out(j, i) = a;
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min<std::size_t>(opt.threads, jobs.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

/// Exact t-SNE layout of members using 1 - ass as the distance.
inline tsne_result ensemble_projection(const square_matrix& assoc, const tsne_options& opt = {}) {
  detail::require(assoc.size() >= 2, "ensemble_projection: need at least two members");
  square_matrix dist(assoc.size());
  for (std::size_t i = 0; i < assoc.size(); ++i)
    for (std::size_t j = 0; j < assoc.size(); ++j) dist(i, j) = i == j ? 0.0 : 1.0 - assoc(i, j);
  return tsne_from_distances(dist, opt);
}

inline rgb_image render_ensemble_scatter(const tsne_result& layout, std::span<const std::string> labels,
                                         std::size_t size = 640) {
  detail::require(labels.size() == layout.positions.size(), "render_ensemble_scatter: one label per member");
  const std::vector<double> weights(labels.size(), 1.0);
  const auto radii = area_radii(weights, layout.positions, 0.015);
  std::vector<scatter_item> items;
  for (std::size_t i = 0; i < labels.size(); ++i)
    items.push_back({{layout.positions[i], radii[i]}, palette_color(0), labels[i]});
  return render_scatter(items, size);
}

}  // namespace voxel2vec
