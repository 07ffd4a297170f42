#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "salboost/cloud.hpp"
#include "salboost/image.hpp"
#include "salboost/spatial_index.hpp"

namespace salboost {

/// Keypoints selected from a source cloud.
struct KeypointSet {
  std::vector<std::size_t> indices;  // unique, into the source cloud
  std::vector<Vec3> positions;
  std::string detector;
  std::map<std::string, double> parameters;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
};

/// One keypoint per occupied voxel: the point nearest the voxel centroid
/// (lowest index on ties). The grid of cubic voxels is anchored at the
/// cloud's bounding-box minimum. Output is in ascending index order.
KeypointSet uniform_sampling(const PointCloud& cloud, double leaf);

struct IssParams {
  double salient_radius = 0.01;
  double nms_radius = 0.006;
  double gamma21 = 0.975;
  double gamma32 = 0.975;
  std::size_t min_neighbors = 5;
};

/// Intrinsic shape signatures. `tree` must index `cloud`.
KeypointSet iss_detect(const PointCloud& cloud, const KdTree3& tree, const IssParams& params = {});

struct FastCorner {
  PixelCoord pixel;
  int score = 0;  // largest threshold at which the pixel is still a corner
};

inline PixelCoord pixel_of(const FastCorner& c) { return c.pixel; }

/// FAST-9 segment-test score at one pixel (-1 when not a corner at any
/// threshold >= 0). The pixel must be at least 3 px from the border.
int fast_score(const GrayImage& image, std::uint32_t row, std::uint32_t col);

/// FAST-9 on the 16-pixel radius-3 circle, full segment test, optional 3x3
/// non-maximum suppression on the score. Corners in raster order.
std::vector<FastCorner> fast_detect(const GrayImage& image, int threshold = 20, bool use_nms = true);

/// Maps pixel keypoints onto an organized cloud; pixels over invalid points
/// are dropped and duplicates collapse.
KeypointSet lift_to_3d(std::span<const PixelCoord> keypoints, const PointCloud& cloud);
KeypointSet lift_to_3d(std::span<const FastCorner> corners, const PointCloud& cloud);

}  // namespace salboost
