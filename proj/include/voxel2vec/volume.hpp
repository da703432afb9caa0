#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "voxel2vec/error.hpp"

namespace voxel2vec {

// Grid extents. Linear indices are x-fastest: i + nx * (j + ny * k).
struct dims3 {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  constexpr std::size_t count() const { return nx * ny * nz; }
  constexpr std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return i + nx * (j + ny * k);
  }
  constexpr bool contains(std::size_t i, std::size_t j, std::size_t k) const {
    return i < nx && j < ny && k < nz;
  }
  friend constexpr bool operator==(const dims3&, const dims3&) = default;
};

inline std::string to_string(const dims3& d) {
  return std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" + std::to_string(d.nz);
}

struct value_range {
  double lo = 0.0;
  double hi = 0.0;
};

// A real-valued scalar field with cached extrema.
class volume {
 public:
  volume() = default;

  volume(dims3 dims, std::vector<double> data) : dims_(dims), data_(std::move(data)) {
    detail::require(dims_.count() > 0, "volume: dims must be positive, got " + to_string(dims_));
    detail::require(data_.size() == dims_.count(),
                    "volume: " + std::to_string(data_.size()) + " values for dims " + to_string(dims_));
    const auto [lo, hi] = std::minmax_element(data_.begin(), data_.end());
    detail::require(std::isfinite(*lo) && std::isfinite(*hi), "volume: non-finite value");
    range_ = {*lo, *hi};
  }

  const dims3& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }
  std::span<const double> data() const { return data_; }
  double operator[](std::size_t i) const { return data_[i]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const { return data_[dims_.index(i, j, k)]; }
  double min() const { return range_.lo; }
  double max() const { return range_.hi; }
  value_range range() const { return range_; }

 private:
  dims3 dims_;
  std::vector<double> data_;
  value_range range_;
};

// Integer levels in [0, R).
class quantized_volume {
 public:
  quantized_volume() = default;
  quantized_volume(dims3 dims, std::vector<std::uint32_t> levels, std::uint32_t level_count)
      : dims_(dims), levels_(std::move(levels)), level_count_(level_count) {
    detail::require(levels_.size() == dims_.count(), "quantized_volume: size mismatch");
  }

  const dims3& dims() const { return dims_; }
  std::size_t size() const { return levels_.size(); }
  std::span<const std::uint32_t> levels() const { return levels_; }
  std::uint32_t operator[](std::size_t i) const { return levels_[i]; }
  std::uint32_t level_count() const { return level_count_; }

 private:
  dims3 dims_;
  std::vector<std::uint32_t> levels_;
  std::uint32_t level_count_ = 0;
};

// Smallest range covering every volume; used so a collection quantizes onto one shared scale.
inline value_range global_range(std::span<const volume> volumes) {
  detail::require(!volumes.empty(), "global_range: no volumes");
  value_range r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& v : volumes) {
    r.lo = std::min(r.lo, v.min());
    r.hi = std::max(r.hi, v.max());
  }
  return r;
}

// Level of a single value under linear min-max binning with the top value clamped to R-1.
inline std::uint32_t quantize_value(double x, value_range bounds, std::uint32_t level_count) {
  const double width = bounds.hi - bounds.lo;
  if (!(width > 0.0)) return 0;
  const double scaled = std::floor((x - bounds.lo) / width * static_cast<double>(level_count));
  if (!(scaled > 0.0)) return 0;
  if (scaled >= static_cast<double>(level_count - 1)) return level_count - 1;
  return static_cast<std::uint32_t>(scaled);
}

// Quantizes against explicit bounds; values outside them clamp to the end levels.
inline quantized_volume quantize(const volume& v, int level_count, value_range bounds) {
  if (level_count <= 0) throw parameter_error("quantize: R must be positive, got " + std::to_string(level_count));
  detail::require(bounds.hi >= bounds.lo, "quantize: bounds.hi < bounds.lo");
  const bool constant = !(bounds.hi > bounds.lo);
  detail::require(level_count >= 2 || constant, "quantize: R must be at least 2 for a non-constant volume");
  const auto r = static_cast<std::uint32_t>(level_count);
  std::vector<std::uint32_t> levels(v.size());
  const auto data = v.data();
  for (std::size_t i = 0; i < levels.size(); ++i) levels[i] = quantize_value(data[i], bounds, r);
  return quantized_volume(v.dims(), std::move(levels), r);
}

inline quantized_volume quantize(const volume& v, int level_count) {
  return quantize(v, level_count, v.range());
}

}  // namespace voxel2vec
