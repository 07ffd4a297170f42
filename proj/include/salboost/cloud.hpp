#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace salboost {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// A single sample. Invalid points carry NaN in all three coordinates; an
/// absent normal is NaN in all three components.
struct Point3 {
  Vec3 position = Vec3::Constant(kNaN);
  Rgb rgb;
  Vec3 normal = Vec3::Constant(kNaN);

  Point3() = default;
  explicit Point3(const Vec3& p) : position(p) {}
  Point3(const Vec3& p, Rgb c) : position(p), rgb(c) {}
  Point3(const Vec3& p, Rgb c, const Vec3& n) : position(p), rgb(c), normal(n) {}

  bool valid() const { return position.allFinite(); }
  bool has_normal() const { return normal.allFinite(); }
};

/// Point cloud, optionally organized on a pixel grid (row-major, height > 1).
///
/// The cloud is immutable once constructed. Construction enforces the layout
/// invariants: width * height == size, any point with a non-finite coordinate
/// becomes fully NaN, and normals are either unit length or fully NaN.
class PointCloud {
 public:
  PointCloud() = default;

  /// Organized constructor. Throws InvalidArgument when width * height does
  /// not match the number of points.
  PointCloud(std::vector<Point3> points, std::uint32_t width, std::uint32_t height,
             bool has_rgb = false, bool has_normals = false);

  /// Unorganized cloud (height = 1).
  static PointCloud unorganized(std::vector<Point3> points, bool has_rgb = false,
                                bool has_normals = false);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  bool organized() const { return height_ > 1; }
  bool dense() const { return dense_; }
  bool has_rgb() const { return has_rgb_; }
  bool has_normals() const { return has_normals_; }

  std::span<const Point3> points() const { return points_; }
  const Point3& operator[](std::size_t i) const { return points_[i]; }
  const Point3& at(std::uint32_t row, std::uint32_t col) const { return points_[index(row, col)]; }
  std::size_t index(std::uint32_t row, std::uint32_t col) const {
    return static_cast<std::size_t>(row) * width_ + col;
  }

  std::size_t valid_count() const;
  /// Indices of valid points, ascending.
  std::vector<std::size_t> valid_indices() const;

  /// Same layout, normals replaced (size must match).
  PointCloud with_normals(std::span<const Vec3> normals) const;

  friend bool operator==(const PointCloud& a, const PointCloud& b);

 private:
  std::vector<Point3> points_;
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 1;
  bool dense_ = true;
  bool has_rgb_ = false;
  bool has_normals_ = false;
};

/// Rotation followed by translation: p -> R p + t.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  /// Validates orthonormality and det = +1 within `tolerance`.
  static RigidTransform from(const Mat3& rotation, const Vec3& translation,
                             double tolerance = 1e-9);
  /// From a homogeneous 4x4; the rotation block is projected onto SO(3) when it
  /// is within `tolerance` of a rotation (text files carry rounded values).
  static RigidTransform from_matrix(const Mat4& m, double tolerance = 1e-4);
  /// From 12 row-major numbers of the upper 3x4 block.
  static RigidTransform from_row_major_3x4(std::span<const double> values,
                                           double tolerance = 1e-4);

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 apply_direction(const Vec3& n) const { return rotation * n; }
  RigidTransform inverse() const;
  Mat4 matrix() const;
  bool is_valid(double tolerance = 1e-9) const;

  /// (a * b)(p) = a(b(p)).
  friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b);
};

/// Axis-aligned box, min <= max componentwise.
struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 extent() const { return max - min; }
  double volume() const;
  bool contains(const Vec3& p) const;
  bool overlaps(const Aabb& other) const;
  /// Intersection volume; 0 when disjoint.
  double intersection_volume(const Aabb& other) const;
  Aabb translated(const Vec3& v) const { return {min + v, max + v}; }
};

/// Rotation angle (radians) of Ra^T Rb.
double rotation_angle_between(const Mat3& a, const Mat3& b);

PointCloud transform_cloud(const PointCloud& cloud, const RigidTransform& t);

/// Tight box over valid points. Throws InvalidArgument on an empty or
/// all-invalid cloud.
Aabb bounding_box(const PointCloud& cloud);
Aabb bounding_box(std::span<const Vec3> points);

/// Unorganized selection of points with the index each one had in its source.
struct SubCloud {
  PointCloud cloud;
  std::vector<std::size_t> source_index;
};

/// The valid points of `cloud` in index order.
SubCloud valid_points(const PointCloud& cloud);

}  // namespace salboost
