#include "salboost/detectors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "salboost/error.hpp"
#include "salboost/geometry.hpp"

namespace salboost {

namespace {

struct VoxelKey {
  std::int64_t x, y, z;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    std::size_t h = static_cast<std::size_t>(k.x) * 73856093u;
    h ^= static_cast<std::size_t>(k.y) * 19349663u;
    h ^= static_cast<std::size_t>(k.z) * 83492791u;
    return h;
  }
};

}  // namespace

KeypointSet uniform_sampling(const PointCloud& cloud, double leaf) {
  if (!(leaf > 0)) throw InvalidArgument("leaf size must be positive");
  if (cloud.valid_count() == 0) throw InvalidArgument("uniform sampling of an empty cloud");
  const Aabb box = bounding_box(cloud);

  std::unordered_map<VoxelKey, std::vector<std::size_t>, VoxelKeyHash> voxels;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud[i];
    if (!p.valid()) continue;
    const Vec3 rel = (p.position - box.min) / leaf;
    voxels[VoxelKey{static_cast<std::int64_t>(std::floor(rel.x())),
                    static_cast<std::int64_t>(std::floor(rel.y())),
                    static_cast<std::int64_t>(std::floor(rel.z()))}]
        .push_back(i);
  }

  std::vector<std::size_t> chosen;
  chosen.reserve(voxels.size());
  for (const auto& [key, members] : voxels) {
    Vec3 centroid = Vec3::Zero();
    for (auto i : members) centroid += cloud[i].position;
    centroid /= static_cast<double>(members.size());
    std::size_t best = members.front();
    double best_d2 = (cloud[best].position - centroid).squaredNorm();
    // Members are in ascending index order, so strict < keeps the lowest index.
    for (auto i : members) {
      const double d2 = (cloud[i].position - centroid).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = i;
      }
    }
    chosen.push_back(best);
  }
  std::sort(chosen.begin(), chosen.end());

  KeypointSet out;
  out.detector = "us";
  out.parameters["leaf"] = leaf;
  out.indices = std::move(chosen);
  for (auto i : out.indices) out.positions.push_back(cloud[i].position);
  return out;
}

KeypointSet iss_detect(const PointCloud& cloud, const KdTree3& tree, const IssParams& params) {
  if (!(params.salient_radius > 0) || !(params.nms_radius > 0))
    throw InvalidArgument("ISS radii must be positive");

  const std::size_t n = cloud.size();
  std::vector<std::vector<Neighbor>> hood(n);
  for (std::size_t i = 0; i < n; ++i)
    if (cloud[i].valid()) hood[i] = tree.radius_search(cloud[i].position, params.salient_radius);

  // Density weights 1 / |neighborhood|.
  std::vector<double> weight(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (!hood[i].empty()) weight[i] = 1.0 / static_cast<double>(hood[i].size());

  std::vector<double> lambda3(n, -1.0);  // < 0: not a candidate
  for (std::size_t i = 0; i < n; ++i) {
    if (hood[i].size() < params.min_neighbors) continue;
    const Vec3& p = cloud[i].position;
    Mat3 scatter = Mat3::Zero();
    double wsum = 0.0;
    for (const auto& nb : hood[i]) {
      const Vec3 d = cloud[nb.index].position - p;
      const double w = weight[nb.index];
      scatter.noalias() += w * d * d.transpose();
      wsum += w;
    }
    scatter /= wsum;
    const Vec3 ev = eigen_symmetric(scatter).values;  // ascending
    const double l1 = ev[2], l2 = ev[1], l3 = ev[0];
    if (!(l1 > 0) || !(l2 > 0)) continue;
    // Noise floor on the smallest eigenvalue so exact planes never qualify.
    if (!(l3 > 1e-12 * l1)) continue;
    if (l2 / l1 < params.gamma21 && l3 / l2 < params.gamma32) lambda3[i] = l3;
  }

  KeypointSet out;
  out.detector = "iss";
  out.parameters = {{"salient_radius", params.salient_radius},
                    {"nms_radius", params.nms_radius},
                    {"gamma21", params.gamma21},
                    {"gamma32", params.gamma32},
                    {"min_neighbors", static_cast<double>(params.min_neighbors)}};
  for (std::size_t i = 0; i < n; ++i) {
    if (lambda3[i] < 0) continue;
    const auto nms = params.nms_radius <= params.salient_radius
                         ? hood[i]
                         : tree.radius_search(cloud[i].position, params.nms_radius);
    bool is_max = true;
    for (const auto& nb : nms) {
      if (nb.distance > params.nms_radius) break;
      const std::size_t j = nb.index;
      if (j == i || lambda3[j] < 0) continue;
      if (lambda3[j] > lambda3[i] || (lambda3[j] == lambda3[i] && j < i)) {
        is_max = false;
        break;
      }
    }
    if (is_max) {
      out.indices.push_back(i);
      out.positions.push_back(cloud[i].position);
    }
  }
  return out;
}

namespace {

// Bresenham circle of radius 3, clockwise from 12 o'clock.
constexpr std::array<std::array<int, 2>, 16> kCircle = {{{-3, 0}, {-3, 1}, {-2, 2}, {-1, 3},
                                                         {0, 3},  {1, 3},  {2, 2},  {3, 1},
                                                         {3, 0},  {3, -1}, {2, -2}, {1, -3},
                                                         {0, -3}, {-1, -3}, {-2, -2}, {-3, -1}}};
constexpr int kArc = 9;

}  // namespace

int fast_score(const GrayImage& image, std::uint32_t row, std::uint32_t col) {
  const int center = image(row, col);
  std::array<int, 16> diff{};
  for (std::size_t k = 0; k < 16; ++k) {
    const auto r = static_cast<std::uint32_t>(static_cast<int>(row) + kCircle[k][0]);
    const auto c = static_cast<std::uint32_t>(static_cast<int>(col) + kCircle[k][1]);
    diff[k] = image(r, c) - center;
  }
  // A pixel is a corner at threshold t iff some arc of 9 has all diffs > t
  // (brighter) or all < -t (darker); the score is the largest such t.
  int best = -1;
  for (std::size_t start = 0; start < 16; ++start) {
    int bright = 255, dark = 255;
    for (int k = 0; k < kArc; ++k) {
      const int d = diff[(start + static_cast<std::size_t>(k)) % 16];
      bright = std::min(bright, d);
      dark = std::min(dark, -d);
    }
    best = std::max({best, bright - 1, dark - 1});
  }
  return best;
}

std::vector<FastCorner> fast_detect(const GrayImage& image, int threshold, bool use_nms) {
  std::vector<FastCorner> out;
  if (image.width < 7 || image.height < 7) return out;
  Raster<int> score(image.width, image.height, -1);
  for (std::uint32_t r = 3; r + 3 < image.height; ++r)
    for (std::uint32_t c = 3; c + 3 < image.width; ++c) {
      const int s = fast_score(image, r, c);
      if (s >= threshold) score(r, c) = s;
    }
  for (std::uint32_t r = 3; r + 3 < image.height; ++r)
    for (std::uint32_t c = 3; c + 3 < image.width; ++c) {
      const int s = score(r, c);
      if (s < 0) continue;
      if (use_nms) {
        bool keep = true;
        for (int dr = -1; dr <= 1 && keep; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const int o = score(static_cast<std::uint32_t>(static_cast<int>(r) + dr),
                                static_cast<std::uint32_t>(static_cast<int>(c) + dc));
            // Equal scores: the earlier pixel in raster order wins.
            const bool earlier = dr < 0 || (dr == 0 && dc < 0);
            if (o > s || (o == s && earlier)) {
              keep = false;
              break;
            }
          }
        if (!keep) continue;
      }
      out.push_back(FastCorner{PixelCoord{r, c}, s});
    }
  return out;
}

KeypointSet lift_to_3d(std::span<const PixelCoord> keypoints, const PointCloud& cloud) {
  if (!cloud.organized()) throw InvalidArgument("lifting 2D keypoints needs an organized cloud");
  KeypointSet out;
  out.detector = "fast";
  std::unordered_set<std::size_t> seen;
  for (const auto& k : keypoints) {
    if (k.row >= cloud.height() || k.col >= cloud.width())
      throw InvalidArgument("keypoint outside the cloud grid");
    const std::size_t idx = cloud.index(k.row, k.col);
    if (!cloud[idx].valid() || !seen.insert(idx).second) continue;
    out.indices.push_back(idx);
    out.positions.push_back(cloud[idx].position);
  }
  return out;
}

KeypointSet lift_to_3d(std::span<const FastCorner> corners, const PointCloud& cloud) {
  std::vector<PixelCoord> px;
  px.reserve(corners.size());
  for (const auto& c : corners) px.push_back(c.pixel);
  return lift_to_3d(px, cloud);
}

}  // namespace salboost
