#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "salboost/error.hpp"
#include "salboost/saliency.hpp"

using namespace salboost;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "salboost_tests";
  fs::create_directories(dir);
  return dir / name;
}

PointCloud grid_cloud(std::uint32_t w, std::uint32_t h, bool hole) {
  std::vector<Point3> pts;
  for (std::uint32_t r = 0; r < h; ++r)
    for (std::uint32_t c = 0; c < w; ++c)
      pts.emplace_back(Vec3(0.01 * c, 0.01 * r, 1.0), Rgb{static_cast<std::uint8_t>(c), 0, 0});
  if (hole) pts[w + 1] = Point3();
  return PointCloud(pts, w, h, true);
}

}  // namespace

TEST(LoadMask, ConstantAndCheckerboard) {
  const auto path = scratch("mask.pgm");
  for (std::uint8_t v : {std::uint8_t{255}, std::uint8_t{0}}) {
    save_pgm(GrayImage(5, 4, v), path.string());
    const auto m = load_mask(path.string());
    for (double x : m.data) EXPECT_EQ(x, v / 255.0);
  }
  GrayImage checker(2, 2);
  checker(0, 0) = 255;
  checker(1, 1) = 255;
  save_pgm(checker, path.string(), false);
  const auto m = load_mask(path.string());
  EXPECT_EQ(m(0, 0), 1.0);
  EXPECT_EQ(m(0, 1), 0.0);
  EXPECT_EQ(m(1, 0), 0.0);
  EXPECT_EQ(m(1, 1), 1.0);
  EXPECT_THROW(load_mask(path.string(), ImageSize{3, 2}), InvalidArgument);
}

TEST(LoadMask, Malformed) {
  const auto path = scratch("broken.pgm");
  std::ofstream(path) << "P2\n2 2\n255\n0 1 2\n";
  EXPECT_THROW(load_mask(path.string()), ParseError);
}

TEST(MaskIo, BinaryRoundTripIsBitwise) {
  BinaryMask m(9, 6);
  for (std::size_t i = 0; i < m.size(); i += 3) m.data[i] = 1;
  const auto path = scratch("binary_mask.pgm");
  save_mask(m, path.string());
  const auto back = binarize(load_mask(path.string()), 0.5, 0);
  EXPECT_EQ(back.data, m.data);

  SaliencyMask s(4, 3);
  for (std::size_t i = 0; i < s.size(); ++i) s.data[i] = static_cast<double>(i * 20) / 255.0;
  save_mask(s, path.string());
  const auto sb = load_mask(path.string());
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(sb.data[i], s.data[i], 1e-6);
}

TEST(SpectralResidual, ConstantImageIsZero) {
  const auto m = spectral_residual_saliency(GrayImage(80, 60, 128));
  for (double v : m.data) EXPECT_EQ(v, 0.0);
}

TEST(SpectralResidual, BlobArgmaxAndRange) {
  GrayImage img(64, 64, 0);
  for (std::uint32_t r = 30; r < 35; ++r)
    for (std::uint32_t c = 12; c < 17; ++c) img(r, c) = 255;
  const auto m = spectral_residual_saliency(img);
  ASSERT_EQ(m.width, 64u);
  std::size_t best = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_GE(m.data[i], 0.0);
    EXPECT_LE(m.data[i], 1.0);
    if (m.data[i] > m.data[best]) best = i;
  }
  const auto row = best / 64, col = best % 64;
  EXPECT_GE(row, 30u);
  EXPECT_LT(row, 35u);
  EXPECT_GE(col, 12u);
  EXPECT_LT(col, 17u);
}

TEST(SpectralResidual, RandomImageInUnitRange) {
  std::mt19937 rng(3);
  RgbImage img(97, 41);
  for (auto& p : img.data) p = Rgb{static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()), 7};
  const auto m = spectral_residual_saliency(img);
  EXPECT_EQ(m.width, 97u);
  EXPECT_EQ(m.height, 41u);
  for (double v : m.data) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Binarize, ThresholdAndDilation) {
  SaliencyMask ones(6, 4, 1.0);
  for (double t : {0.01, 0.5, 0.99}) EXPECT_EQ(binarize(ones, t, 0).salient_count(), 24u);

  SaliencyMask two(2, 1);
  two.data = {0.4, 0.6};
  const auto b = binarize(two, 0.5, 0);
  EXPECT_FALSE(b.salient(0, 0));
  EXPECT_TRUE(b.salient(0, 1));

  SaliencyMask dot(7, 7, 0.0);
  dot(3, 3) = 1.0;
  const auto d = binarize(dot, 0.5, 1);
  for (std::uint32_t r = 0; r < 7; ++r)
    for (std::uint32_t c = 0; c < 7; ++c)
      EXPECT_EQ(d.salient(r, c), r >= 2 && r <= 4 && c >= 2 && c <= 4);

  EXPECT_THROW(binarize(dot, 0.0), InvalidArgument);
  EXPECT_THROW(binarize(dot, 1.0), InvalidArgument);
}

TEST(FilterCloud, FullEmptyAndHalf) {
  const auto cloud = grid_cloud(10, 6, true);
  const auto all = filter_cloud(cloud, full_mask(10, 6));
  EXPECT_EQ(all.cloud.size(), cloud.valid_count());
  EXPECT_EQ(all.source_index, cloud.valid_indices());

  EXPECT_EQ(filter_cloud(cloud, BinaryMask(10, 6)).cloud.size(), 0u);

  BinaryMask left(10, 6);
  for (std::uint32_t r = 0; r < 6; ++r)
    for (std::uint32_t c = 0; c < 5; ++c) left(r, c) = 1;
  const auto half = filter_cloud(cloud, left);
  std::vector<std::size_t> expected;
  for (std::uint32_t r = 0; r < 6; ++r)
    for (std::uint32_t c = 0; c < 5; ++c)
      if (cloud.at(r, c).valid()) expected.push_back(cloud.index(r, c));
  EXPECT_EQ(half.source_index, expected);
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(half.cloud[i].position, cloud[expected[i]].position);

  EXPECT_THROW(filter_cloud(cloud, BinaryMask(6, 10)), InvalidArgument);
  EXPECT_THROW(filter_cloud(PointCloud::unorganized({Point3(Vec3(0, 0, 1))}), full_mask(1, 1)), InvalidArgument);
}

TEST(FilterKeypoints2d, Membership) {
  std::vector<PixelCoord> kps{{0, 0}, {1, 2}, {3, 3}, {2, 1}};
  const std::span<const PixelCoord> span(kps);
  EXPECT_EQ(filter_keypoints_2d(span, full_mask(4, 4)), kps);
  EXPECT_TRUE(filter_keypoints_2d(span, BinaryMask(4, 4)).empty());

  BinaryMask m(4, 4);
  m(1, 2) = 1;
  m(2, 1) = 1;
  m(0, 3) = 1;
  std::vector<PixelCoord> expected;
  for (const auto& k : kps)
    if (m(k.row, k.col)) expected.push_back(k);
  EXPECT_EQ(filter_keypoints_2d(span, m), expected);

  std::vector<PixelCoord> outside{{4, 0}};
  EXPECT_THROW(filter_keypoints_2d(std::span<const PixelCoord>(outside), m), InvalidArgument);
}
