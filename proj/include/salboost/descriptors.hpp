#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "salboost/cloud.hpp"
#include "salboost/geometry.hpp"
#include "salboost/spatial_index.hpp"

namespace salboost {

enum class DescriptorFamily { Shot, Cshot, Fpfh, Pfhrgb };

/// 352, 1344, 33 and 250 values respectively.
std::size_t descriptor_length(DescriptorFamily family);
std::string_view to_string(DescriptorFamily family);
/// Accepts "shot", "cshot", "fpfh", "pfhrgb". Throws InvalidArgument otherwise.
DescriptorFamily parse_descriptor_family(std::string_view name);
bool needs_rgb(DescriptorFamily family);

struct Descriptor {
  DescriptorFamily family = DescriptorFamily::Shot;
  std::vector<double> values;
  std::size_t keypoint = 0;  // index into the described cloud
  bool empty_support = false;
};

inline constexpr double kDefaultDescriptorRadius = 0.05;

/// sRGB (D65) to CIELab.
Vec3 rgb_to_lab(Rgb c);

// SHOT layout: 8 azimuth x 2 elevation x 2 radial volumes, 11 cosine bins
// each; CSHOT appends 31 color bins per volume.
inline constexpr std::size_t kShotVolumes = 32;
inline constexpr std::size_t kShotCosineBins = 11;
inline constexpr std::size_t kShotColorBins = 31;

/// Signature of histograms of orientations at `keypoint` (an index into
/// `cloud`, which must carry normals and be indexed by `tree`). All-zero and
/// flagged when the support is empty; unit L2 norm otherwise.
Descriptor shot(const PointCloud& cloud, const KdTree3& tree, std::size_t keypoint,
                const LocalReferenceFrame& lrf, double radius = kDefaultDescriptorRadius);

/// SHOT plus a CIELab color part. Throws InvalidArgument without RGB.
Descriptor cshot(const PointCloud& cloud, const KdTree3& tree, std::size_t keypoint,
                 const LocalReferenceFrame& lrf, double radius = kDefaultDescriptorRadius);

using Spfh = std::array<double, 33>;

/// Simplified point feature histogram: counts of the (alpha, phi, theta)
/// features between `index` and each neighbor within `radius`, 11 bins each.
Spfh spfh(const PointCloud& cloud, const KdTree3& tree, std::size_t index, double radius);

/// SPFH(p) + (1/K) sum_k SPFH(p_k) / |p - p_k| before block normalization.
/// Returns an empty vector when the keypoint has no usable neighbor.
std::vector<double> fpfh_weighted_sum(const PointCloud& cloud, const KdTree3& tree,
                                      std::size_t keypoint, double radius = kDefaultDescriptorRadius);

/// Fast point feature histograms; each 11-bin block sums to 100.
std::vector<Descriptor> fpfh(const PointCloud& cloud, const KdTree3& tree,
                             std::span<const std::size_t> keypoints,
                             double radius = kDefaultDescriptorRadius);

/// Point feature histogram with color ratios over every pair of the
/// keypoint's support. Throws InvalidArgument without RGB and
/// DegenerateGeometry when no pair in the support yields features.
Descriptor pfhrgb(const PointCloud& cloud, const KdTree3& tree, std::size_t keypoint,
                  double radius = kDefaultDescriptorRadius);

/// Dispatch over families for a set of keypoints. Keypoints whose support
/// cannot produce a descriptor (too few neighbors for an LRF, singleton
/// PFHRGB support) get an all-zero descriptor with empty_support set.
std::vector<Descriptor> compute_descriptors(DescriptorFamily family, const PointCloud& cloud,
                                            const KdTree3& tree,
                                            std::span<const std::size_t> keypoints,
                                            double radius = kDefaultDescriptorRadius);

}  // namespace salboost
