#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "voxel2vec/error.hpp"

namespace voxel2vec {

using rgb = std::array<std::uint8_t, 3>;

class rgb_image {
 public:
  rgb_image() = default;
  rgb_image(std::size_t width, std::size_t height, rgb fill = {255, 255, 255})
      : width_(width), height_(height), pixels_(width * height * 3) {
    for (std::size_t i = 0; i < width * height; ++i) std::copy(fill.begin(), fill.end(), pixels_.begin() + 3 * i);
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::span<const std::uint8_t> bytes() const { return pixels_; }

  rgb at(std::size_t x, std::size_t y) const {
    const std::size_t o = 3 * (y * width_ + x);
    return {pixels_[o], pixels_[o + 1], pixels_[o + 2]};
  }
  void set(std::size_t x, std::size_t y, rgb c) {
    const std::size_t o = 3 * (y * width_ + x);
    pixels_[o] = c[0];
    pixels_[o + 1] = c[1];
    pixels_[o + 2] = c[2];
  }

  void fill_rect(std::size_t x0, std::size_t y0, std::size_t w, std::size_t h, rgb c) {
    for (std::size_t y = y0; y < std::min(height_, y0 + h); ++y)
      for (std::size_t x = x0; x < std::min(width_, x0 + w); ++x) set(x, y, c);
  }

  void fill_disc(double cx, double cy, double r, rgb c) {
    const auto x0 = static_cast<long>(std::floor(cx - r)), x1 = static_cast<long>(std::ceil(cx + r));
    const auto y0 = static_cast<long>(std::floor(cy - r)), y1 = static_cast<long>(std::ceil(cy + r));
    for (long y = std::max(0L, y0); y <= std::min<long>(static_cast<long>(height_) - 1, y1); ++y)
      for (long x = std::max(0L, x0); x <= std::min<long>(static_cast<long>(width_) - 1, x1); ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        if (dx * dx + dy * dy <= r * r) set(static_cast<std::size_t>(x), static_cast<std::size_t>(y), c);
      }
  }

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

inline void write_png(const std::filesystem::path& path, const rgb_image& img) {
  detail::require(img.width() > 0 && img.height() > 0, "write_png: empty image");
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw io_error("cannot create directory for " + path.string() + ": " + ec.message());
  png_image info{};
  info.version = PNG_IMAGE_VERSION;
  info.width = static_cast<png_uint_32>(img.width());
  info.height = static_cast<png_uint_32>(img.height());
  info.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&info, path.c_str(), 0, img.bytes().data(), 0, nullptr))
    throw io_error("cannot write PNG " + path.string() + ": " + info.message);
}

inline rgb_image read_png(const std::filesystem::path& path) {
  png_image info{};
  info.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&info, path.c_str()))
    throw io_error("cannot read PNG " + path.string() + ": " + info.message);
  info.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(info));
  if (!png_image_finish_read(&info, nullptr, buffer.data(), 0, nullptr))
    throw io_error("cannot decode PNG " + path.string() + ": " + info.message);
  rgb_image img(info.width, info.height);
  for (std::size_t y = 0; y < info.height; ++y)
    for (std::size_t x = 0; x < info.width; ++x) {
      const std::size_t o = 3 * (y * info.width + x);
      img.set(x, y, {buffer[o], buffer[o + 1], buffer[o + 2]});
    }
  return img;
}

namespace detail {

// 3x5 glyphs, one row per 3 bits, top row first. Unknown characters draw nothing.
inline std::array<std::uint8_t, 5> glyph(char ch) {
  switch (ch) {
    case '0': return {7, 5, 5, 5, 7};
    case '1': return {2, 6, 2, 2, 7};
    case '2': return {7, 1, 7, 4, 7};
    case '3': return {7, 1, 3, 1, 7};
    case '4': return {5, 5, 7, 1, 1};
    case '5': return {7, 4, 7, 1, 7};
    case '6': return {7, 4, 7, 5, 7};
    case '7': return {7, 1, 1, 2, 2};
    case '8': return {7, 5, 7, 5, 7};
    case '9': return {7, 5, 7, 1, 7};
    case '-': return {0, 0, 7, 0, 0};
    case '.': return {0, 0, 0, 0, 2};
    case ',': return {0, 0, 0, 2, 4};
    case '=': return {0, 7, 0, 7, 0};
    case ':': return {0, 2, 0, 2, 0};
    case '_': return {0, 0, 0, 0, 7};
    case 'A': return {2, 5, 7, 5, 5};
    case 'B': return {6, 5, 6, 5, 6};
    case 'C': return {7, 4, 4, 4, 7};
    case 't': return {2, 7, 2, 2, 3};
    default: return {0, 0, 0, 0, 0};
  }
}

}  // namespace detail

// Draws text with its top-left corner at (x, y); each glyph pixel becomes a scale x scale block.
inline void draw_text(rgb_image& img, std::size_t x, std::size_t y, std::string_view text, rgb color,
                      std::size_t scale = 2) {
  for (char ch : text) {
    const auto rows = detail::glyph(ch);
    for (std::size_t r = 0; r < 5; ++r)
      for (std::size_t c = 0; c < 3; ++c)
        if (rows[r] & (4 >> c)) img.fill_rect(x + c * scale, y + r * scale, scale, scale, color);
    x += 4 * scale;
  }
}

// Linear light-blue to dark-blue ramp.
inline constexpr rgb ramp_low = {222, 235, 247};
inline constexpr rgb ramp_high = {8, 48, 107};

inline rgb ramp_color(double value, double lo = 0.0, double hi = 1.0) {
  double t = hi > lo ? (value - lo) / (hi - lo) : 0.0;
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  rgb c;
  for (int i = 0; i < 3; ++i)
    c[i] = static_cast<std::uint8_t>(std::lround(ramp_low[i] + t * (ramp_high[i] - ramp_low[i])));
  return c;
}

inline constexpr rgb gray = {170, 170, 170};

// Qualitative palette for labelled features.
inline rgb palette_color(std::size_t i) {
  static constexpr std::array<rgb, 10> colors = {{{31, 119, 180},
                                                  {255, 127, 14},
                                                  {44, 160, 44},
                                                  {214, 39, 40},
                                                  {148, 103, 189},
                                                  {140, 86, 75},
                                                  {227, 119, 194},
                                                  {188, 189, 34},
                                                  {23, 190, 207},
                                                  {66, 66, 150}}};
  return colors[i % colors.size()];
}

}  // namespace voxel2vec
