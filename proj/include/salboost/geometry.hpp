#pragma once

#include <optional>
#include <span>
#include <vector>

#include "salboost/cloud.hpp"
#include "salboost/spatial_index.hpp"

namespace salboost {

/// Eigen-decomposition of a symmetric 3x3 matrix via the closed-form solver.
/// Eigenvalues ascending; eigenvectors are the matching columns.
struct SymmetricEigen3 {
  Vec3 values;
  Mat3 vectors;
};
SymmetricEigen3 eigen_symmetric(const Mat3& m);

/// Orthonormal right-handed basis at a keypoint: x cross y = z.
struct LocalReferenceFrame {
  Vec3 x = Vec3::UnitX();
  Vec3 y = Vec3::UnitY();
  Vec3 z = Vec3::UnitZ();

  /// Rows are the axes, so frame.rotation() * v expresses v in the frame.
  Mat3 rotation() const;
};

/// Darboux-frame pair features; all angles in radians.
struct PairFeatures {
  double alpha = 0.0;  // [0, pi]
  double phi = 0.0;    // [0, pi]
  double theta = 0.0;  // (-pi, pi]
  double d = 0.0;      // meters
};

/// Pair features plus which point ended up as the Darboux source.
struct DarbouxPair {
  PairFeatures features;
  bool swapped = false;  // true when the second argument is the source
};

/// Cosines of alpha and phi plus theta and d for a Darboux-ordered pair;
/// the histogram descriptors bin these directly.
struct PairCosines {
  double cos_alpha = 0.0;
  double cos_phi = 0.0;
  double theta = 0.0;
  double d = 0.0;
  bool swapped = false;
};

/// Normal at `index` from its k nearest neighbors (the point itself
/// included), oriented toward `viewpoint`. NaN when the neighborhood has
/// rank < 2.
Vec3 estimate_normal_at(const PointCloud& cloud, const KdTree3& tree, std::size_t index,
                        std::size_t k = 10, const Vec3& viewpoint = Vec3::Zero());

/// Cloud with a normal for every valid point (NaN where degenerate).
/// Throws InvalidArgument when k < 3.
PointCloud estimate_normals(const PointCloud& cloud, const KdTree3& tree, std::size_t k = 10,
                            const Vec3& viewpoint = Vec3::Zero());
/// Normals at `indices` only; every other point gets NaN.
PointCloud estimate_normals(const PointCloud& cloud, const KdTree3& tree, std::span<const std::size_t> indices,
                            std::size_t k = 10, const Vec3& viewpoint = Vec3::Zero());

/// SHOT-style local reference frame from the neighbors within `radius`.
/// Throws DegenerateGeometry with fewer than 5 neighbors.
LocalReferenceFrame compute_lrf(const PointCloud& cloud, const KdTree3& tree, const Vec3& keypoint,
                                double radius);
LocalReferenceFrame compute_lrf(const PointCloud& cloud, std::span<const Neighbor> neighbors,
                                const Vec3& keypoint, double radius);

inline constexpr double kPairSourceTieTolerance = 1e-10;

/// Orders the pair by the Darboux convention (the point whose normal makes
/// the smaller angle with the connecting line is the source; the first point
/// when the two |n.e| differ by at most kPairSourceTieTolerance) and computes
/// the features. nullopt when the points coincide or the source normal is
/// parallel to the connecting line.
std::optional<DarbouxPair> try_pair_features(const Vec3& p1, const Vec3& n1, const Vec3& p2,
                                             const Vec3& n2);

std::optional<PairCosines> try_pair_cosines(const Vec3& p1, const Vec3& n1, const Vec3& p2,
                                            const Vec3& n2);

/// Throwing form of try_pair_features.
PairFeatures pair_features(const Point3& a, const Point3& b);

}  // namespace salboost
