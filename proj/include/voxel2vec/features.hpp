#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "voxel2vec/dbscan.hpp"
#include "voxel2vec/io.hpp"
#include "voxel2vec/layout.hpp"
#include "voxel2vec/model.hpp"
#include "voxel2vec/symbols.hpp"
#include "voxel2vec/tsne.hpp"

namespace voxel2vec {

inline constexpr std::uint16_t noise_voxel_label = 65535;

struct classify_options {
  double eps = 0.85;
  int min_pts = 4;
  std::optional<std::uint64_t> min_voxels;  // default: 0.1% of the voxel count
  distance_metric metric = distance_metric::cosine;
  // Cluster the level tuples themselves (levels / (R - 1)) instead of the embeddings.
  bool raw_space = false;
};

struct feature {
  int id = 0;
  std::vector<symbol_id> symbols;
  std::uint64_t voxel_count = 0;
  std::vector<double> mean;  // voxel-weighted mean of the clustered vectors
  point2 position{0.0, 0.0};
  double radius = 0.0;
  bool filtered = false;  // below min_voxels; kept but drawn gray
};

struct feature_set {
  dims3 dims;
  std::vector<int> symbol_label;  // per symbol; noise_label for noise
  std::vector<feature> features;
  std::uint64_t noise_voxels = 0;
  std::uint64_t min_voxels = 0;
  bool layout_resolved = true;

  std::uint64_t total_voxels() const {
    std::uint64_t t = noise_voxels;
    for (const auto& f : features) t += f.voxel_count;
    return t;
  }
};

// The vectors each symbol is clustered by.
template <class Real>
point_set clustering_points(const basic_embedding_model<Real>& m, const symbol_table& table, bool raw_space) {
  point_set pts;
  pts.count = m.symbols();
  if (raw_space) {
    pts.dimension = table.arity();
    const double scale = table.level_count() > 1 ? 1.0 / (table.level_count() - 1) : 1.0;
    for (symbol_id s = 0; s < pts.count; ++s)
      for (auto level : table.combination(s)) pts.values.push_back(level * scale);
  } else {
    pts.dimension = m.dimension();
    pts.values.reserve(pts.count * pts.dimension);
    for (symbol_id s = 0; s < pts.count; ++s)
      for (Real v : m.center(s)) pts.values.push_back(static_cast<double>(v));
  }
  return pts;
}

/// Clusters symbols and groups the voxels of each cluster into one feature.
template <class Real>
feature_set classify_features(const basic_embedding_model<Real>& m, const symbol_volume& sv,
                              const classify_options& opt = {}) {
  detail::require(m.epochs_trained() > 0, "classify_features: model is untrained");
  detail::require(m.symbols() == sv.symbol_count(), "classify_features: model and volume use different tables");
  const auto pts = clustering_points(m, sv.table(), opt.raw_space);
  const auto labels = dbscan(pts, opt.eps, opt.min_pts, opt.metric);
  const auto counts = symbol_counts(sv);

  feature_set fs;
  fs.dims = sv.dims();
  fs.symbol_label = labels;
  fs.min_voxels = opt.min_voxels.value_or(static_cast<std::uint64_t>(std::ceil(0.001 * sv.size())));
  int clusters = 0;
  for (int l : labels) clusters = std::max(clusters, l + 1);
  fs.features.resize(clusters);
  for (int c = 0; c < clusters; ++c) {
    fs.features[c].id = c;
    fs.features[c].mean.assign(pts.dimension, 0.0);
  }
  for (symbol_id s = 0; s < labels.size(); ++s) {
    if (labels[s] == noise_label) {
      fs.noise_voxels += counts[s];
      continue;
    }
    auto& f = fs.features[labels[s]];
    f.symbols.push_back(s);
    f.voxel_count += counts[s];
  }
  for (auto& f : fs.features) {
    // Clusters made only of symbols absent from this volume fall back to an unweighted mean.
    for (symbol_id s : f.symbols) {
      const double w = f.voxel_count > 0 ? static_cast<double>(counts[s]) / f.voxel_count : 1.0 / f.symbols.size();
      for (std::size_t a = 0; a < pts.dimension; ++a) f.mean[a] += w * pts[s][a];
    }
    f.filtered = f.voxel_count < fs.min_voxels;
  }
  return fs;
}

struct projection_options {
  std::uint64_t seed = 1;
  int iterations = 1000;
  double perplexity = 5.0;
  int overlap_iterations = 500;
};

/// Places features in 2D with t-SNE on their mean vectors, sizes discs by voxel count and
/// removes overlaps.
inline void project_features(feature_set& fs, const projection_options& opt = {}) {
  if (fs.features.empty()) return;
  point_set pts;
  pts.count = fs.features.size();
  pts.dimension = fs.features.front().mean.size();
  for (const auto& f : fs.features) pts.values.insert(pts.values.end(), f.mean.begin(), f.mean.end());
  tsne_options t;
  t.seed = opt.seed;
  t.iterations = opt.iterations;
  t.perplexity = opt.perplexity;
  const auto layout = tsne_from_points(pts, t);

  std::vector<double> weights;
  for (const auto& f : fs.features) weights.push_back(static_cast<double>(f.voxel_count));
  const auto radii = area_radii(weights, layout.positions);
  std::vector<disc> discs(fs.features.size());
  for (std::size_t i = 0; i < discs.size(); ++i) discs[i] = {layout.positions[i], radii[i]};
  fs.layout_resolved = resolve_overlaps(discs, opt.overlap_iterations).resolved;
  for (std::size_t i = 0; i < discs.size(); ++i) {
    fs.features[i].position = discs[i].center;
    fs.features[i].radius = discs[i].radius;
  }
}

inline rgb feature_color(const feature& f) { return f.filtered ? gray : palette_color(f.id); }

inline std::string hex_color(rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

// Per-voxel feature id; noise voxels get noise_voxel_label.
inline std::vector<std::uint16_t> label_voxels(const feature_set& fs, const symbol_volume& sv) {
  detail::require(fs.symbol_label.size() == sv.symbol_count(), "label_voxels: feature set and volume differ");
  detail::require(fs.features.size() < noise_voxel_label, "label_voxels: too many features for 16-bit labels");
  std::vector<std::uint16_t> out(sv.size());
  for (std::size_t v = 0; v < sv.size(); ++v) {
    const int l = fs.symbol_label[sv[v]];
    out[v] = l == noise_label ? noise_voxel_label : static_cast<std::uint16_t>(l);
  }
  return out;
}

inline json feature_legend(const feature_set& fs, const symbol_table& table) {
  json legend;
  legend["dims"] = {fs.dims.nx, fs.dims.ny, fs.dims.nz};
  legend["dtype"] = "uint16";
  legend["noise_label"] = noise_voxel_label;
  legend["noise_voxels"] = fs.noise_voxels;
  legend["min_voxels"] = fs.min_voxels;
  legend["layout_resolved"] = fs.layout_resolved;
  json features = json::array();
  for (const auto& f : fs.features) {
    json words = json::array();
    for (symbol_id s : f.symbols) words.push_back(table.word(s));
    features.push_back({{"id", f.id},
                        {"symbols", words},
                        {"voxel_count", f.voxel_count},
                        {"position", {f.position[0], f.position[1]}},
                        {"radius", f.radius},
                        {"color", hex_color(feature_color(f))},
                        {"filtered", f.filtered}});
  }
  legend["features"] = features;
  return legend;
}

/// Writes the u16 label volume and its JSON legend.
inline void export_label_volume(const feature_set& fs, const symbol_volume& sv, const fs::path& raw_path,
                                const fs::path& legend_path) {
  write_u16_raw(raw_path, label_voxels(fs, sv));
  auto legend = feature_legend(fs, sv.table());
  legend["raw"] = raw_path.filename().string();
  write_text_atomic(legend_path, legend.dump(2) + "\n");
}

inline rgb_image render_feature_scatter(const feature_set& fs, std::size_t size = 512) {
  std::vector<scatter_item> items;
  // Filtered features first so the kept ones stay on top.
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& f : fs.features)
      if (f.filtered == (pass == 0)) items.push_back({{f.position, f.radius}, feature_color(f), ""});
  return render_scatter(items, size);
}

}  // namespace voxel2vec
