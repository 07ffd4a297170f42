#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "salboost/cloud.hpp"
#include "salboost/error.hpp"
#include "salboost/image.hpp"

namespace salboost {

/// Per-pixel salience in [0, 1] over the registered color image.
struct SaliencyMask : Raster<double> {
  using Raster::Raster;
};

/// Thresholded (and possibly dilated) saliency; 1 = salient.
struct BinaryMask : Raster<std::uint8_t> {
  using Raster::Raster;

  bool salient(std::uint32_t row, std::uint32_t col) const { return (*this)(row, col) != 0; }
  std::size_t salient_count() const;
  double coverage() const { return empty() ? 0.0 : static_cast<double>(salient_count()) / size(); }
};

struct ImageSize {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
};

/// 8-bit PGM (P2/P5); values = pixel / 255. Throws ParseError on malformed
/// files and InvalidArgument when `expected` is given and differs.
SaliencyMask load_mask(const std::string& path, std::optional<ImageSize> expected = std::nullopt);
void save_mask(const SaliencyMask& mask, const std::string& path);
void save_mask(const BinaryMask& mask, const std::string& path);
/// Every pixel salient.
BinaryMask full_mask(std::uint32_t width, std::uint32_t height);

/// Spectral-residual saliency: gray, resized to 64 px on the long side,
/// FFT, log amplitude minus its 3x3 box average, inverse FFT of the residual
/// with the original phase, squared magnitude, Gaussian blur (sigma 2.5 px),
/// resized back, min-max normalized. A constant image gives all zeros.
SaliencyMask spectral_residual_saliency(const GrayImage& image);
SaliencyMask spectral_residual_saliency(const RgbImage& image);

/// Salient iff value >= threshold, then dilated by a square kernel of
/// radius `dilate_px`. Throws InvalidArgument unless 0 < threshold < 1.
BinaryMask binarize(const SaliencyMask& mask, double threshold = 0.5, std::uint32_t dilate_px = 8);
BinaryMask dilate(const BinaryMask& mask, std::uint32_t radius);

/// Valid points of an organized cloud whose pixel is salient, with their
/// original indices. Throws InvalidArgument for an unorganized cloud or a
/// mask of different size.
SubCloud filter_cloud(const PointCloud& cloud, const BinaryMask& mask);

inline PixelCoord pixel_of(const PixelCoord& p) { return p; }

/// Keypoints whose pixel is salient, order preserved. Throws InvalidArgument
/// for a coordinate outside the mask.
template <typename Keypoint>
std::vector<Keypoint> filter_keypoints_2d(std::span<const Keypoint> keypoints, const BinaryMask& mask) {
  std::vector<Keypoint> out;
  out.reserve(keypoints.size());
  for (const auto& k : keypoints) {
    const PixelCoord p = pixel_of(k);
    if (p.row >= mask.height || p.col >= mask.width)
      throw InvalidArgument("keypoint (" + std::to_string(p.row) + ", " + std::to_string(p.col) +
                            ") outside the " + std::to_string(mask.width) + "x" +
                            std::to_string(mask.height) + " mask");
    if (mask.salient(p.row, p.col)) out.push_back(k);
  }
  return out;
}

}  // namespace salboost
