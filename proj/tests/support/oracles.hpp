#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "salboost/cloud.hpp"
#include "salboost/descriptors.hpp"
#include "salboost/evaluation.hpp"
#include "salboost/recognition.hpp"
#include "salboost/spatial_index.hpp"

namespace sbtest {

using salboost::Vec3;

using Rng = std::mt19937_64;

salboost::Mat3 random_rotation(Rng& rng);
salboost::RigidTransform random_transform(Rng& rng, double translation_scale = 1.0);

/// Linear scans with the same squared-distance expression as the kd-tree.
std::vector<salboost::Neighbor> linear_knn(std::span<const Vec3> points, const Vec3& q, std::size_t k);
std::vector<salboost::Neighbor> linear_radius(std::span<const Vec3> points, const Vec3& q, double r);

struct BruteMatch {
  std::size_t row = 0;
  double distance = 0.0;
};
/// First row with the smallest Euclidean distance.
BruteMatch brute_nearest(const salboost::DescriptorIndex& index, std::span<const double> query);

/// Greedy grouping re-derived by enumeration: for each unassigned seed in
/// order, the clique of unassigned correspondences containing it whose
/// membership vector is lexicographically greatest. Needs at most 20 inputs.
std::vector<std::vector<std::size_t>> exhaustive_groups(std::span<const salboost::Correspondence> c, double epsilon,
                                                        std::size_t min_size);

/// Noisy height field z = f(x, y) with RGB, points and outward normals
/// (normals left NaN when `with_normals` is false).
salboost::PointCloud bumpy_patch(Rng& rng, std::size_t n, double extent, double noise, bool with_normals,
                                 const Vec3& center = Vec3(0, 0, 0.5));

/// Transcriptions of the histogram descriptors over an unindexed cloud.
std::vector<double> naive_fpfh(const salboost::PointCloud& cloud, std::size_t keypoint, double radius);
std::vector<double> naive_pfhrgb(const salboost::PointCloud& cloud, std::size_t keypoint, double radius);

/// Largest L-infinity change of `family` descriptors at random keypoints of a
/// bumpy patch when the whole patch, viewpoint included, is moved rigidly and
/// normals, frames and descriptors are recomputed from scratch.
double rigid_invariance_deviation(salboost::DescriptorFamily family, Rng& rng, std::size_t keypoints,
                                  std::size_t transforms, double radius = 0.05);

/// Midpoint Riemann sum of the linearly interpolated curve, with duplicate
/// recalls merged to their best precision and the curve held flat to recall 0.
double riemann_auc(std::span<const salboost::PrcPoint> points, std::size_t steps);

}  // namespace sbtest
