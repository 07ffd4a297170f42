#include <cmath>
#include <random>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "salboost/error.hpp"
#include "salboost/geometry.hpp"

using namespace salboost;

namespace {

void expect_orthonormal(const LocalReferenceFrame& f) {
  EXPECT_NEAR(f.x.norm(), 1.0, 1e-6);
  EXPECT_NEAR(f.y.norm(), 1.0, 1e-6);
  EXPECT_NEAR(f.z.norm(), 1.0, 1e-6);
  EXPECT_NEAR(f.x.dot(f.y), 0.0, 1e-6);
  EXPECT_NEAR(f.y.dot(f.z), 0.0, 1e-6);
  EXPECT_NEAR(f.x.dot(f.z), 0.0, 1e-6);
  EXPECT_LT((f.x.cross(f.y) - f.z).norm(), 1e-6);
}

}  // namespace

TEST(SymmetricEigen, DiagonalAndRotated) {
  sbtest::Rng rng(1);
  const Mat3 r = sbtest::random_rotation(rng);
  const Mat3 m = r * Vec3(3, 1, 2).asDiagonal() * r.transpose();
  const auto e = eigen_symmetric(m);
  EXPECT_NEAR(e.values[0], 1, 1e-12);
  EXPECT_NEAR(e.values[1], 2, 1e-12);
  EXPECT_NEAR(e.values[2], 3, 1e-12);
  EXPECT_LT((m * e.vectors.col(0) - e.vectors.col(0)).norm(), 1e-10);
}

TEST(Normals, PlaneFacesViewpoint) {
  sbtest::Rng rng(2);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  std::vector<Point3> pts;
  for (int i = 0; i < 400; ++i) pts.emplace_back(Vec3(u(rng), u(rng), 0.0));
  const auto cloud = PointCloud::unorganized(pts);
  const KdTree3 tree(cloud);
  const auto out = estimate_normals(cloud, tree, 10, Vec3(0, 0, 1));
  ASSERT_TRUE(out.has_normals());
  for (const auto& p : out.points()) EXPECT_LT((p.normal - Vec3(0, 0, 1)).norm(), 1e-6);
  EXPECT_THROW(estimate_normals(cloud, tree, 2), InvalidArgument);
}

TEST(Normals, SphereNorthPole) {
  std::vector<Point3> pts;
  const std::size_t n = 20000;
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / n;
    const double r = std::sqrt(1 - z * z);
    pts.emplace_back(Vec3(r * std::cos(golden * i), r * std::sin(golden * i), z));
  }
  const auto cloud = PointCloud::unorganized(pts);
  const KdTree3 tree(cloud);
  const auto pole = tree.nearest(Vec3(0, 0, 1)).index;
  const Vec3 normal = estimate_normal_at(cloud, tree, pole, 10, Vec3(0, 0, 10));
  EXPECT_LT(std::acos(std::min(1.0, normal.dot(cloud[pole].position.normalized()))), 0.05);
  EXPECT_GT(normal.z(), 0.99);
}

TEST(Normals, CollinearIsInvalid) {
  std::vector<Point3> pts;
  for (int i = 0; i < 20; ++i) pts.emplace_back(Vec3(0.01 * i, 0, 1));
  const auto cloud = PointCloud::unorganized(pts);
  const KdTree3 tree(cloud);
  const auto out = estimate_normals(cloud, tree);
  for (const auto& p : out.points()) EXPECT_FALSE(p.has_normal());
}

TEST(Normals, RigidInvarianceWithViewpoint) {
  sbtest::Rng rng(3);
  const auto cloud = sbtest::bumpy_patch(rng, 600, 0.1, 0.0005, false);
  const KdTree3 tree(cloud);
  const auto base = estimate_normals(cloud, tree);
  const auto t = sbtest::random_transform(rng, 0.5);
  const auto moved = transform_cloud(cloud, t);
  const KdTree3 moved_tree(moved);
  const auto out = estimate_normals(moved, moved_tree, 10, t.apply(Vec3::Zero()));
  for (std::size_t i = 0; i < cloud.size(); ++i)
    EXPECT_LT((out[i].normal - t.apply_direction(base[i].normal)).norm(), 1e-8);
}

TEST(Lrf, PlanarDiscIsRepeatable) {
  std::vector<Point3> pts;
  for (int ring = 1; ring <= 5; ++ring)
    for (int k = 0; k < 12; ++k) {
      const double a = 2 * M_PI * k / 12 + 0.1 * ring;
      pts.emplace_back(Vec3(0.008 * ring * std::cos(a), 0.008 * ring * std::sin(a), 1.0));
    }
  pts.emplace_back(Vec3(0, 0, 1));
  const auto cloud = PointCloud::unorganized(pts);
  const KdTree3 tree(cloud);
  const auto a = compute_lrf(cloud, tree, Vec3(0, 0, 1), 0.05);
  const auto b = compute_lrf(cloud, tree, Vec3(0, 0, 1), 0.05);
  EXPECT_NEAR(std::abs(a.z.z()), 1.0, 1e-9);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.z, b.z);
  expect_orthonormal(a);
}

TEST(Lrf, RotatesWithNeighborhood) {
  sbtest::Rng rng(4);
  const auto cloud = sbtest::bumpy_patch(rng, 800, 0.1, 0.0003, false);
  const KdTree3 tree(cloud);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = sbtest::random_transform(rng, 1.0);
    const auto moved = transform_cloud(cloud, t);
    const KdTree3 moved_tree(moved);
    const std::size_t k = static_cast<std::size_t>(trial) * 37 % cloud.size();
    const auto f = compute_lrf(cloud, tree, cloud[k].position, 0.03);
    const auto g = compute_lrf(moved, moved_tree, moved[k].position, 0.03);
    expect_orthonormal(g);
    EXPECT_LT((g.x - t.rotation * f.x).norm(), 1e-6);
    EXPECT_LT((g.y - t.rotation * f.y).norm(), 1e-6);
    EXPECT_LT((g.z - t.rotation * f.z).norm(), 1e-6);
  }
}

TEST(Lrf, TooFewNeighbors) {
  std::vector<Point3> pts;
  for (int i = 0; i < 4; ++i) pts.emplace_back(Vec3(0.001 * i, 0.002 * (i % 2), 1));
  const auto cloud = PointCloud::unorganized(pts);
  const KdTree3 tree(cloud);
  EXPECT_THROW(compute_lrf(cloud, tree, Vec3(0, 0, 1), 0.05), DegenerateGeometry);
}

TEST(PairFeatures, CoplanarIdenticalNormals) {
  const Point3 a(Vec3(0, 0, 0), {}, Vec3(0, 0, 1));
  const Point3 b(Vec3(1, 0, 0), {}, Vec3(0, 0, 1));
  const auto f = pair_features(a, b);
  EXPECT_NEAR(f.alpha, M_PI / 2, 1e-12);
  EXPECT_NEAR(f.theta, 0.0, 1e-12);
  EXPECT_NEAR(f.d, 1.0, 1e-12);
  EXPECT_THROW(pair_features(a, a), DegenerateGeometry);
}

TEST(PairFeatures, RangesAndRigidInvariance) {
  sbtest::Rng rng(5);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    const Point3 a(Vec3(g(rng), g(rng), g(rng)), {}, Vec3(g(rng), g(rng), g(rng)).normalized());
    const Point3 b(Vec3(g(rng), g(rng), g(rng)), {}, Vec3(g(rng), g(rng), g(rng)).normalized());
    const auto f = pair_features(a, b);
    EXPECT_GE(f.alpha, 0);
    EXPECT_LE(f.alpha, M_PI);
    EXPECT_GE(f.phi, 0);
    EXPECT_LE(f.phi, M_PI);
    EXPECT_GT(f.theta, -M_PI);
    EXPECT_LE(f.theta, M_PI);
    const auto t = sbtest::random_transform(rng, 5.0);
    const Point3 ta(t.apply(a.position), {}, t.apply_direction(a.normal));
    const Point3 tb(t.apply(b.position), {}, t.apply_direction(b.normal));
    const auto h = pair_features(ta, tb);
    EXPECT_NEAR(f.alpha, h.alpha, 1e-9);
    EXPECT_NEAR(f.phi, h.phi, 1e-9);
    EXPECT_NEAR(f.theta, h.theta, 1e-9);
    EXPECT_NEAR(f.d, h.d, 1e-9);
  }
}
