#pragma once

#include <array>
#include <cmath>
#include <numbers>

#include "voxel2vec/volume.hpp"

namespace voxel2vec {

// Which amplitude modulation the second velocity component uses. The printed form
// modulates the first component by 0.5*t*sin(0.1*pi*t) but the second by 0.5*sin(0.1*pi*t);
// the symmetric form uses 0.5*t*sin(0.1*pi*t) for both.
enum class abc_variant { faithful, symmetric };

struct abc_params {
  double A = std::numbers::sqrt3;
  double B = std::numbers::sqrt2;
  double C = 1.0;
};

struct axis_range {
  double lo = 0.0;
  double hi = 2.0 * std::numbers::pi;
};

struct abc_fields {
  volume vx, vy, vz;
  volume s1;  // velocity magnitude
};

// sin(pi * x) that is exactly zero at integer x.
inline double sin_pi(double x) {
  const double r = std::remainder(x, 2.0);  // exact, in [-1, 1]
  if (r == 0.0 || r == 1.0 || r == -1.0) return 0.0;
  return std::sin(std::numbers::pi * r);
}

/// Samples the time-dependent ABC flow
///   vx = (A + 0.5 t sin(0.1 pi t)) sin z + C cos y
///   vy = B sin x + (A + 0.5 sin(0.1 pi t)) cos z      (faithful variant)
///   vz = C sin y + B cos x
/// at the grid points lo + (hi - lo) * i / n of each half-open axis range.
inline abc_fields gen_abc_flow(const abc_params& p, double t, dims3 dims,
                               const std::array<axis_range, 3>& domain = {},
                               abc_variant variant = abc_variant::faithful) {
  detail::require(dims.count() > 0, "gen_abc_flow: dims must be positive");
  const double wave = sin_pi(t / 10.0);
  const double amp_x = p.A + 0.5 * t * wave;
  const double amp_y = variant == abc_variant::faithful ? p.A + 0.5 * wave : amp_x;

  auto axis = [](const axis_range& r, std::size_t n) {
    std::vector<double> coords(n);
    for (std::size_t i = 0; i < n; ++i)
      coords[i] = r.lo + (r.hi - r.lo) * static_cast<double>(i) / static_cast<double>(n);
    return coords;
  };
  const auto xs = axis(domain[0], dims.nx);
  const auto ys = axis(domain[1], dims.ny);
  const auto zs = axis(domain[2], dims.nz);

  const std::size_t count = dims.count();
  std::vector<double> vx(count), vy(count), vz(count), s1(count);
  for (std::size_t k = 0; k < dims.nz; ++k) {
    const double sz = std::sin(zs[k]), cz = std::cos(zs[k]);
    for (std::size_t j = 0; j < dims.ny; ++j) {
      const double sy = std::sin(ys[j]), cy = std::cos(ys[j]);
      for (std::size_t i = 0; i < dims.nx; ++i) {
        const double sx = std::sin(xs[i]), cx = std::cos(xs[i]);
        const std::size_t idx = dims.index(i, j, k);
        vx[idx] = amp_x * sz + p.C * cy;
        vy[idx] = p.B * sx + amp_y * cz;
        vz[idx] = p.C * sy + p.B * cx;
        s1[idx] = std::sqrt(vx[idx] * vx[idx] + vy[idx] * vy[idx] + vz[idx] * vz[idx]);
      }
    }
  }
  return {volume(dims, std::move(vx)), volume(dims, std::move(vy)), volume(dims, std::move(vz)),
          volume(dims, std::move(s1))};
}

}  // namespace voxel2vec
