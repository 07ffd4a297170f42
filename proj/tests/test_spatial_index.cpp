#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "salboost/error.hpp"
#include "salboost/spatial_index.hpp"

using namespace salboost;

namespace {

std::vector<Vec3> random_points(sbtest::Rng& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  return pts;
}

}  // namespace

TEST(KdTree, SinglePoint) {
  const std::vector<Vec3> pts{Vec3(1, 2, 3)};
  KdTree3 tree{std::span<const Vec3>(pts)};
  EXPECT_EQ(tree.nearest(Vec3(-5, 9, 0)).index, 0u);
}

TEST(KdTree, CubeCornerTieTakesLowestIndex) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 8; ++i) pts.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  KdTree3 tree{std::span<const Vec3>(pts)};
  const auto nn = tree.nearest(Vec3(0.5, 0.5, 0.5));
  EXPECT_EQ(nn.index, 0u);
  EXPECT_DOUBLE_EQ(nn.distance, std::sqrt(3.0) / 2);
}

TEST(KdTree, RadiusTrivia) {
  sbtest::Rng rng(1);
  const auto pts = random_points(rng, 300);
  KdTree3 tree{std::span<const Vec3>(pts)};
  const auto self = tree.radius_search(pts[17], 1e-9);
  ASSERT_EQ(self.size(), 1u);
  EXPECT_EQ(self[0].index, 17u);
  EXPECT_EQ(self[0].distance, 0.0);
  EXPECT_EQ(tree.radius_search(Vec3::Zero(), 1e6).size(), pts.size());
  EXPECT_THROW(tree.radius_search(Vec3::Zero(), 0.0), InvalidArgument);
  EXPECT_THROW(tree.knn(Vec3::Zero(), 0), InvalidArgument);
}

TEST(KdTree, KnnTrivia) {
  sbtest::Rng rng(2);
  const auto pts = random_points(rng, 40);
  KdTree3 tree{std::span<const Vec3>(pts)};
  EXPECT_EQ(tree.knn(pts[3], 1)[0].distance, 0.0);
  EXPECT_EQ(tree.knn(Vec3(3, 3, 3), 100), sbtest::linear_knn(pts, Vec3(3, 3, 3), 100));
}

TEST(KdTree, SkipsInvalidPoints) {
  std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3::Constant(kNaN), Vec3(1, 0, 0)};
  KdTree3 tree{std::span<const Vec3>(pts)};
  EXPECT_EQ(tree.size(), 2u);
  EXPECT_EQ(tree.nearest(Vec3(0.9, 0, 0)).index, 2u);
  EXPECT_THROW(KdTree3{PointCloud{}}, InvalidArgument);
}

TEST(KdTree, MatchesLinearScan) {
  sbtest::Rng rng(3);
  const auto pts = random_points(rng, 2000);
  KdTree3 tree{std::span<const Vec3>(pts)};
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  std::uniform_int_distribution<std::size_t> k(1, 40);
  for (int q = 0; q < 100; ++q) {
    const Vec3 query(u(rng), u(rng), u(rng));
    const auto kk = k(rng);
    EXPECT_EQ(tree.knn(query, kk), sbtest::linear_knn(pts, query, kk));
    EXPECT_EQ(tree.radius_search(query, 0.2), sbtest::linear_radius(pts, query, 0.2));
    EXPECT_EQ(tree.nearest(query), sbtest::linear_knn(pts, query, 1)[0]);
  }
}

TEST(DescriptorIndex, ExactRowAndTies) {
  std::vector<DescriptorIndex::Row> rows;
  for (int i = 0; i < 8; ++i) rows.push_back({{0, i, 0}, {double(i), 0.0}});
  DescriptorIndex idx(2, rows);
  const std::vector<double> q5{5.0, 0.0};
  EXPECT_EQ(idx.nearest(q5).row, 5u);
  EXPECT_EQ(idx.nearest(q5).distance, 0.0);

  DescriptorIndex tie(1, {{{2, 0, 0}, {1.0}}, {{1, 0, 0}, {-1.0}}});
  const std::vector<double> zero{0.0};
  EXPECT_EQ(tie.provenance(tie.nearest(zero).row).model, 1);
  EXPECT_EQ(tie.provenance(tie.nearest_batch(zero)[0].row).model, 1);

  EXPECT_THROW(DescriptorIndex(2, {{{0, 0, 0}, {1.0}}}), InvalidArgument);
  EXPECT_THROW(DescriptorIndex(1, {{{0, 0, 0}, {1.0}}, {{0, 0, 0}, {2.0}}}), InvalidArgument);
  EXPECT_THROW(DescriptorIndex().nearest(zero), InvalidArgument);
}

TEST(DescriptorIndex, MatchesBruteForce) {
  sbtest::Rng rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t dim = 33;
  std::vector<DescriptorIndex::Row> rows;
  for (int r = 0; r < 500; ++r) {
    std::vector<double> v(dim);
    for (auto& x : v) x = u(rng);
    rows.push_back({{r % 7, r / 7, static_cast<std::size_t>(r)}, v});
  }
  // A few exact duplicates exercise the tie rule.
  for (int r = 0; r < 5; ++r) rows.push_back({{9, 0, static_cast<std::size_t>(r)}, rows[r * 3].values});
  DescriptorIndex idx(dim, rows);
  std::vector<double> queries;
  for (int q = 0; q < 50; ++q) {
    if (q < 5) {
      const auto row = idx.row(static_cast<std::size_t>(q) * 11);
      queries.insert(queries.end(), row.begin(), row.end());
    } else {
      for (std::size_t d = 0; d < dim; ++d) queries.push_back(u(rng));
    }
  }
  const auto batch = idx.nearest_batch(queries);
  ASSERT_EQ(batch.size(), 50u);
  for (std::size_t q = 0; q < 50; ++q) {
    const std::span<const double> query(queries.data() + q * dim, dim);
    const auto oracle = sbtest::brute_nearest(idx, query);
    const auto single = idx.nearest(query);
    EXPECT_EQ(single.row, oracle.row);
    EXPECT_EQ(single.distance, oracle.distance);
    EXPECT_EQ(batch[q].row, oracle.row);
    EXPECT_EQ(batch[q].distance, oracle.distance);
  }
}
