#include "salboost/cloud.hpp"

#include <algorithm>
#include <string>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "salboost/error.hpp"

namespace salboost {

namespace {

void sanitize(Point3& p) {
  if (!p.position.allFinite()) p.position.setConstant(kNaN);
  if (!p.normal.allFinite()) {
    p.normal.setConstant(kNaN);
    return;
  }
  const double n = p.normal.norm();
  if (n == 0.0) {
    p.normal.setConstant(kNaN);
  } else if (std::abs(n - 1.0) > 1e-12) {
    p.normal /= n;
  }
}

}  // namespace

PointCloud::PointCloud(std::vector<Point3> points, std::uint32_t width, std::uint32_t height,
                       bool has_rgb, bool has_normals)
    : points_(std::move(points)),
      width_(width),
      height_(height),
      has_rgb_(has_rgb),
      has_normals_(has_normals) {
  if (static_cast<std::size_t>(width) * height != points_.size()) {
    throw InvalidArgument("cloud layout " + std::to_string(width) + "x" +
                          std::to_string(height) + " does not match " +
                          std::to_string(points_.size()) + " points");
  }
  if (height_ == 0) height_ = 1;
  dense_ = true;
  for (auto& p : points_) {
    sanitize(p);
    if (!p.valid()) dense_ = false;
  }
}

PointCloud PointCloud::unorganized(std::vector<Point3> points, bool has_rgb, bool has_normals) {
  const auto n = static_cast<std::uint32_t>(points.size());
  return PointCloud(std::move(points), n, 1, has_rgb, has_normals);
}

std::size_t PointCloud::valid_count() const {
  return static_cast<std::size_t>(
      std::count_if(points_.begin(), points_.end(), [](const Point3& p) { return p.valid(); }));
}

std::vector<std::size_t> PointCloud::valid_indices() const {
  std::vector<std::size_t> out;
  out.reserve(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i)
    if (points_[i].valid()) out.push_back(i);
  return out;
}

PointCloud PointCloud::with_normals(std::span<const Vec3> normals) const {
  if (normals.size() != points_.size()) throw InvalidArgument("normal count mismatch");
  std::vector<Point3> pts(points_.begin(), points_.end());
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i].normal = normals[i];
  return PointCloud(std::move(pts), width_, height_, has_rgb_, true);
}

bool operator==(const PointCloud& a, const PointCloud& b) {
  if (a.width_ != b.width_ || a.height_ != b.height_ || a.has_rgb_ != b.has_rgb_ ||
      a.has_normals_ != b.has_normals_)
    return false;
  // NaN-aware bitwise comparison.
  auto same = [](const Vec3& x, const Vec3& y) {
    for (int k = 0; k < 3; ++k) {
      if (std::isnan(x[k]) && std::isnan(y[k])) continue;
      if (x[k] != y[k]) return false;
    }
    return true;
  };
  for (std::size_t i = 0; i < a.points_.size(); ++i) {
    const auto& p = a.points_[i];
    const auto& q = b.points_[i];
    if (!same(p.position, q.position)) return false;
    if (a.has_rgb_ && !(p.rgb == q.rgb)) return false;
    if (a.has_normals_ && !same(p.normal, q.normal)) return false;
  }
  return true;
}

RigidTransform RigidTransform::from(const Mat3& rotation, const Vec3& translation,
                                    double tolerance) {
  RigidTransform t{rotation, translation};
  if (!t.is_valid(tolerance)) throw InvalidArgument("rotation is not orthonormal with det +1");
  return t;
}

RigidTransform RigidTransform::from_matrix(const Mat4& m, double tolerance) {
  if (!m.allFinite()) throw InvalidArgument("non-finite transform");
  if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > tolerance)
    throw InvalidArgument("transform bottom row must be 0 0 0 1");
  const Mat3 r = m.topLeftCorner<3, 3>();
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > tolerance ||
      std::abs(r.determinant() - 1.0) > tolerance)
    throw InvalidArgument("transform rotation block is not a rotation");
  Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return RigidTransform{svd.matrixU() * svd.matrixV().transpose(), m.topRightCorner<3, 1>()};
}

RigidTransform RigidTransform::from_row_major_3x4(std::span<const double> values,
                                                  double tolerance) {
  if (values.size() != 12) throw InvalidArgument("expected 12 pose values");
  Mat4 m = Mat4::Identity();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = values[static_cast<std::size_t>(r * 4 + c)];
  return from_matrix(m, tolerance);
}

RigidTransform RigidTransform::inverse() const {
  const Mat3 rt = rotation.transpose();
  return RigidTransform{rt, -(rt * translation)};
}

Mat4 RigidTransform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

bool RigidTransform::is_valid(double tolerance) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() <= tolerance &&
         std::abs(rotation.determinant() - 1.0) <= tolerance;
}

RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return RigidTransform{a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

double Aabb::volume() const {
  const Vec3 e = extent();
  return e.x() * e.y() * e.z();
}

bool Aabb::contains(const Vec3& p) const {
  return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
}

bool Aabb::overlaps(const Aabb& other) const {
  return (min.array() <= other.max.array()).all() && (other.min.array() <= max.array()).all();
}

double Aabb::intersection_volume(const Aabb& other) const {
  const Vec3 lo = min.cwiseMax(other.min);
  const Vec3 hi = max.cwiseMin(other.max);
  const Vec3 e = (hi - lo).cwiseMax(0.0);
  return e.x() * e.y() * e.z();
}

double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const Mat3 d = a.transpose() * b;
  // atan2 form keeps precision near zero.
  const Vec3 axis(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (d.trace() - 1.0));
}

PointCloud transform_cloud(const PointCloud& cloud, const RigidTransform& t) {
  std::vector<Point3> out(cloud.points().begin(), cloud.points().end());
  for (auto& p : out) {
    if (!p.valid()) continue;
    p.position = t.apply(p.position);
    if (p.has_normal()) p.normal = t.apply_direction(p.normal);
  }
  return PointCloud(std::move(out), cloud.width(), cloud.height(), cloud.has_rgb(),
                    cloud.has_normals());
}

Aabb bounding_box(std::span<const Vec3> points) {
  bool any = false;
  Aabb box;
  for (const auto& p : points) {
    if (!p.allFinite()) continue;
    if (!any) {
      box.min = box.max = p;
      any = true;
    } else {
      box.min = box.min.cwiseMin(p);
      box.max = box.max.cwiseMax(p);
    }
  }
  if (!any) throw InvalidArgument("bounding box of a cloud without valid points");
  return box;
}

Aabb bounding_box(const PointCloud& cloud) {
  std::vector<Vec3> pts;
  pts.reserve(cloud.size());
  for (const auto& p : cloud.points())
    if (p.valid()) pts.push_back(p.position);
  return bounding_box(pts);
}

SubCloud valid_points(const PointCloud& cloud) {
  SubCloud out;
  std::vector<Point3> pts;
  pts.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!cloud[i].valid()) continue;
    pts.push_back(cloud[i]);
    out.source_index.push_back(i);
  }
  out.cloud = PointCloud::unorganized(std::move(pts), cloud.has_rgb(), cloud.has_normals());
  return out;
}

}  // namespace salboost
