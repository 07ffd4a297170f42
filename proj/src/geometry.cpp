#include "salboost/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "salboost/error.hpp"

namespace salboost {

namespace {

constexpr std::size_t kMinLrfNeighbors = 5;

/// Flips `axis` so most neighbors lie on its non-negative side. On an exact
/// count tie the weighted sum of projections decides, and only if that is
/// zero too the largest-magnitude component is made positive.
Vec3 disambiguate(const Vec3& axis, std::span<const Vec3> offsets, std::span<const double> weights) {
  std::ptrdiff_t balance = 0;
  double moment = 0.0;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    const double dp = offsets[i].dot(axis);
    balance += dp >= 0 ? 1 : -1;
    moment += weights[i] * dp;
  }
  if (balance > 0) return axis;
  if (balance < 0) return -axis;
  if (moment > 0) return axis;
  if (moment < 0) return -axis;
  Eigen::Index k;
  axis.cwiseAbs().maxCoeff(&k);
  return axis[k] >= 0 ? axis : Vec3(-axis);
}

}  // namespace

SymmetricEigen3 eigen_symmetric(const Mat3& m) {
  Eigen::SelfAdjointEigenSolver<Mat3> solver;
  solver.computeDirect(m);
  return {solver.eigenvalues(), solver.eigenvectors()};
}

Mat3 LocalReferenceFrame::rotation() const {
  Mat3 r;
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();
  return r;
}

Vec3 estimate_normal_at(const PointCloud& cloud, const KdTree3& tree, std::size_t index,
                        std::size_t k, const Vec3& viewpoint) {
  const Point3& p = cloud[index];
  if (!p.valid()) return Vec3::Constant(kNaN);
  const auto nn = tree.knn(p.position, k);
  if (nn.size() < 3) return Vec3::Constant(kNaN);
  Vec3 centroid = Vec3::Zero();
  for (const auto& n : nn) centroid += tree.position(n.index);
  centroid /= static_cast<double>(nn.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& n : nn) {
    const Vec3 d = tree.position(n.index) - centroid;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(nn.size());
  const auto eig = eigen_symmetric(cov);
  // Rank < 2: collinear or coincident neighborhood.
  if (!(eig.values[2] > 0) || eig.values[1] <= 1e-12 * eig.values[2]) return Vec3::Constant(kNaN);
  Vec3 normal = eig.vectors.col(0).normalized();
  if (normal.dot(viewpoint - p.position) < 0) normal = -normal;
  return normal;
}

PointCloud estimate_normals(const PointCloud& cloud, const KdTree3& tree, std::size_t k,
                            const Vec3& viewpoint) {
  if (k < 3) throw InvalidArgument("normal estimation needs k >= 3");
  std::vector<Vec3> normals(cloud.size(), Vec3::Constant(kNaN));
  for (std::size_t i = 0; i < cloud.size(); ++i)
    normals[i] = estimate_normal_at(cloud, tree, i, k, viewpoint);
  return cloud.with_normals(normals);
}

PointCloud estimate_normals(const PointCloud& cloud, const KdTree3& tree, std::span<const std::size_t> indices,
                            std::size_t k, const Vec3& viewpoint) {
  if (k < 3) throw InvalidArgument("normal estimation needs k >= 3");
  std::vector<Vec3> normals(cloud.size(), Vec3::Constant(kNaN));
  for (auto i : indices) {
    if (i >= cloud.size()) throw InvalidArgument("normal index out of range");
    normals[i] = estimate_normal_at(cloud, tree, i, k, viewpoint);
  }
  return cloud.with_normals(normals);
}

LocalReferenceFrame compute_lrf(const PointCloud& cloud, const KdTree3& tree, const Vec3& keypoint,
                                double radius) {
  const auto nn = tree.radius_search(keypoint, radius);
  return compute_lrf(cloud, nn, keypoint, radius);
}

LocalReferenceFrame compute_lrf(const PointCloud& cloud, std::span<const Neighbor> neighbors,
                                const Vec3& keypoint, double radius) {
  std::vector<Vec3> offsets;
  std::vector<double> weights;
  offsets.reserve(neighbors.size());
  weights.reserve(neighbors.size());
  Mat3 cov = Mat3::Zero();
  double wsum = 0.0;
  for (const auto& n : neighbors) {
    if (n.distance > radius) continue;
    const Vec3 d = cloud[n.index].position - keypoint;
    if (d.isZero(0.0)) continue;
    const double w = radius - n.distance;
    offsets.push_back(d);
    weights.push_back(w);
    cov.noalias() += w * d * d.transpose();
    wsum += w;
  }
  if (offsets.size() < kMinLrfNeighbors)
    throw DegenerateGeometry("local reference frame needs at least 5 neighbors, found " +
                             std::to_string(offsets.size()));
  if (!(wsum > 0)) throw DegenerateGeometry("local reference frame support has zero weight");
  cov /= wsum;
  const auto eig = eigen_symmetric(cov);
  LocalReferenceFrame f;
  f.x = disambiguate(eig.vectors.col(2).normalized(), offsets, weights);
  f.z = disambiguate(eig.vectors.col(0).normalized(), offsets, weights);
  // Re-orthogonalize z against x before completing the basis.
  f.z = (f.z - f.z.dot(f.x) * f.x).normalized();
  f.y = f.z.cross(f.x);
  return f;
}

std::optional<PairCosines> try_pair_cosines(const Vec3& p1, const Vec3& n1, const Vec3& p2,
                                            const Vec3& n2) {
  Vec3 dp = p2 - p1;
  const double d = dp.norm();
  if (!(d > 0)) return std::nullopt;
  dp /= d;
  PairCosines out;
  const Vec3* ns = &n1;
  const Vec3* nt = &n2;
  // Equal normals tie up to rounding; within the tolerance the first point stays the source.
  if (std::abs(n2.dot(dp)) - std::abs(n1.dot(dp)) > kPairSourceTieTolerance) {
    out.swapped = true;
    ns = &n2;
    nt = &n1;
    dp = -dp;
  }
  const Vec3& u = *ns;
  Vec3 v = u.cross(dp);
  const double vn = v.norm();
  if (!(vn > 1e-12)) return std::nullopt;
  v /= vn;
  const Vec3 w = u.cross(v);
  out.cos_alpha = std::clamp(v.dot(*nt), -1.0, 1.0);
  out.cos_phi = std::clamp(u.dot(dp), -1.0, 1.0);
  out.theta = std::atan2(w.dot(*nt), u.dot(*nt));
  if (out.theta == -M_PI) out.theta = M_PI;
  out.d = d;
  return out;
}

std::optional<DarbouxPair> try_pair_features(const Vec3& p1, const Vec3& n1, const Vec3& p2,
                                             const Vec3& n2) {
  const auto c = try_pair_cosines(p1, n1, p2, n2);
  if (!c) return std::nullopt;
  DarbouxPair out;
  out.swapped = c->swapped;
  out.features = PairFeatures{std::acos(c->cos_alpha), std::acos(c->cos_phi), c->theta, c->d};
  return out;
}

PairFeatures pair_features(const Point3& a, const Point3& b) {
  if (!a.has_normal() || !b.has_normal()) throw InvalidArgument("pair features need valid normals");
  if (a.position == b.position) throw DegenerateGeometry("pair features of coincident points");
  auto r = try_pair_features(a.position, a.normal, b.position, b.normal);
  if (!r) throw DegenerateGeometry("source normal is parallel to the connecting line");
  return r->features;
}

}  // namespace salboost
