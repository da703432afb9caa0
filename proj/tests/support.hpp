#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "voxel2vec/dbscan.hpp"
#include "voxel2vec/symbols.hpp"
#include "voxel2vec/volume.hpp"

namespace v2v_test {

namespace fs = std::filesystem;
using namespace voxel2vec;

// A fresh directory under the system temp dir, removed on destruction.
class temp_dir {
 public:
  explicit temp_dir(const std::string& tag = "v2v") {
    std::random_device rd;
    path_ = fs::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~temp_dir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  temp_dir(const temp_dir&) = delete;
  temp_dir& operator=(const temp_dir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::vector<unsigned char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline std::string file_text(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Left half of the grid (x < n/2) holds values in [0, 0.45), the right half values in
// [0.55, 1), drawn i.i.d. per voxel.
inline volume two_blob_volume(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 0.45);
  const dims3 d{n, n, n};
  std::vector<double> v(d.count());
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) v[d.index(i, j, k)] = (i < n / 2 ? 0.0 : 0.55) + u(rng);
  return volume(d, std::move(v));
}

struct two_blob_data {
  std::shared_ptr<const symbol_table> table;
  symbol_volume sv;
  int levels = 0;

  // 0 for symbols whose level lies in the low range, 1 for the high range.
  int blob(symbol_id s) const { return table->combination(s)[0] < static_cast<std::uint32_t>(levels / 2) ? 0 : 1; }
};

// Quantized against [0, 1] so levels below R/2 come from the left blob.
inline two_blob_data two_blob(std::size_t n, int R, std::uint64_t seed) {
  const std::vector<quantized_volume> q{quantize(two_blob_volume(n, seed), R, {0.0, 1.0})};
  auto [table, sv] = symbolize(q);
  return {table, std::move(sv), R};
}

// Mean similarity over same-blob and cross-blob symbol pairs (diagonal excluded).
template <class Matrix>
std::pair<double, double> blob_similarity(const Matrix& m, const two_blob_data& data) {
  double within = 0.0, cross = 0.0;
  int nw = 0, nc = 0;
  const auto n = static_cast<symbol_id>(data.table->size());
  for (symbol_id a = 0; a < n; ++a)
    for (symbol_id b = 0; b < n; ++b) {
      if (a == b) continue;
      if (data.blob(a) == data.blob(b)) {
        within += m(a, b);
        ++nw;
      } else {
        cross += m(a, b);
        ++nc;
      }
    }
  return {within / nw, cross / nc};
}

// Reference DBSCAN written from the definition: core points are those with at least
// min_pts points (self included) within eps; clusters are the connected components of
// cores under the eps relation, numbered by their smallest core index; a border point
// takes the smallest cluster number among its core neighbours.
inline std::vector<int> reference_dbscan(const point_set& pts, double eps, int min_pts, distance_metric metric) {
  const std::size_t n = pts.count;
  std::vector<double> dist(n * n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      double value;
      if (metric == distance_metric::euclidean) {
        double acc = 0.0;
        for (std::size_t i = 0; i < pts.dimension; ++i) acc += std::pow(pts[a][i] - pts[b][i], 2);
        value = std::sqrt(acc);
      } else {
        double ab = 0.0, aa = 0.0, bb = 0.0;
        for (std::size_t i = 0; i < pts.dimension; ++i) {
          ab += pts[a][i] * pts[b][i];
          aa += pts[a][i] * pts[a][i];
          bb += pts[b][i] * pts[b][i];
        }
        value = aa == 0.0 || bb == 0.0 ? 1.0 : 1.0 - ab / (std::sqrt(aa) * std::sqrt(bb));
      }
      dist[a * n + b] = value;
    }
  auto near = [&](std::size_t a, std::size_t b) { return a == b || dist[a * n + b] <= eps; };

  std::vector<bool> core(n);
  for (std::size_t a = 0; a < n; ++a) {
    int count = 0;
    for (std::size_t b = 0; b < n; ++b) count += near(a, b);
    core[a] = count >= min_pts;
  }

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (core[a] && core[b] && near(a, b)) {
        const auto ra = find(a), rb = find(b);
        parent[std::max(ra, rb)] = std::min(ra, rb);  // root = smallest index
      }

  std::vector<int> number(n, -1);
  int next = 0;
  std::vector<int> labels(n, noise_label);
  for (std::size_t a = 0; a < n; ++a) {
    if (!core[a]) continue;
    const auto r = find(a);
    if (number[r] < 0) number[r] = next++;
    labels[a] = number[r];
  }
  for (std::size_t a = 0; a < n; ++a) {
    if (core[a]) continue;
    for (std::size_t b = 0; b < n; ++b)
      if (core[b] && near(a, b) && (labels[a] == noise_label || labels[b] < labels[a])) labels[a] = labels[b];
  }
  return labels;
}

}  // namespace v2v_test
