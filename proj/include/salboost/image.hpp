#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "salboost/cloud.hpp"

namespace salboost {

/// Row-major raster.
template <typename T>
struct Raster {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<T> data;

  Raster() = default;
  Raster(std::uint32_t w, std::uint32_t h, T fill = T{})
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  bool empty() const { return data.empty(); }
  std::size_t size() const { return data.size(); }
  std::size_t index(std::uint32_t row, std::uint32_t col) const {
    return static_cast<std::size_t>(row) * width + col;
  }
  T& operator()(std::uint32_t row, std::uint32_t col) { return data[index(row, col)]; }
  const T& operator()(std::uint32_t row, std::uint32_t col) const { return data[index(row, col)]; }

  friend bool operator==(const Raster&, const Raster&) = default;
};

using GrayImage = Raster<std::uint8_t>;
using RgbImage = Raster<Rgb>;

struct PixelCoord {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

GrayImage to_gray(const RgbImage& image);

/// Color raster of an organized cloud; invalid points render black.
RgbImage rgb_image_of(const PointCloud& cloud);

/// Netpbm I/O. PGM (P2/P5) and PPM (P3/P6), maxval <= 255.
GrayImage load_pgm(const std::string& path);
RgbImage load_ppm(const std::string& path);
/// Loads PGM or PPM, converting to RGB.
RgbImage load_image(const std::string& path);
void save_pgm(const GrayImage& image, const std::string& path, bool binary = true);
void save_ppm(const RgbImage& image, const std::string& path, bool binary = true);

}  // namespace salboost
