#include <cmath>
#include <filesystem>
#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "salboost/error.hpp"
#include "salboost/recognition.hpp"

using namespace salboost;

namespace {

ModelView random_view(sbtest::Rng& rng, int model, int view, std::size_t n, std::size_t dim = 33) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ModelView v;
  v.model = model;
  v.view = view;
  for (std::size_t i = 0; i < n; ++i) {
    v.keypoints.emplace_back(u(rng) * 0.1, u(rng) * 0.1, 0.7 + u(rng) * 0.1);
    Descriptor d;
    d.family = DescriptorFamily::Fpfh;
    d.values.resize(dim);
    for (auto& x : d.values) x = u(rng);
    d.keypoint = i;
    v.descriptors.push_back(d);
  }
  return v;
}

Correspondence corr(const Vec3& scene, const Vec3& model) {
  Correspondence c;
  c.scene_position = scene;
  c.model_position = model;
  return c;
}

}  // namespace

TEST(Database, RowCounts) {
  sbtest::Rng rng(1);
  EXPECT_EQ(build_database({random_view(rng, 0, 0, 10)}).index().rows(), 10u);

  std::vector<ModelView> views;
  std::size_t total = 0;
  for (int m = 0; m < 6; ++m)
    for (int v = 0; v < 15; ++v) {
      const std::size_t n = 3 + static_cast<std::size_t>(m * 15 + v) % 7;
      views.push_back(random_view(rng, m, v, n));
      total += n;
    }
  const auto db = build_database(views);
  EXPECT_EQ(db.index().rows(), total);
  EXPECT_EQ(db.model_ids(), (std::vector<int>{0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(db.view(3, 7).keypoints.size(), views[3 * 15 + 7].keypoints.size());
  EXPECT_THROW(db.view(9, 0), InvalidArgument);
}

TEST(Database, RejectsBadInput) {
  sbtest::Rng rng(2);
  EXPECT_THROW(build_database({}), InvalidArgument);
  EXPECT_THROW(build_database({random_view(rng, 0, 0, 3), random_view(rng, 0, 0, 4)}), InvalidArgument);
  auto uneven = random_view(rng, 0, 0, 3);
  uneven.keypoints.pop_back();
  EXPECT_THROW(build_database({uneven}), InvalidArgument);
  auto mixed = random_view(rng, 1, 0, 3);
  mixed.descriptors[1].family = DescriptorFamily::Pfhrgb;
  EXPECT_THROW(build_database({mixed}), InvalidArgument);
}

TEST(Database, SaveLoadRoundTrip) {
  sbtest::Rng rng(3);
  auto a = random_view(rng, 0, 0, 5);
  auto b = random_view(rng, 2, 1, 7);
  b.view_to_model = sbtest::random_transform(rng, 0.2);
  const auto db = build_database({a, b});
  const auto dir = std::filesystem::temp_directory_path() / "salboost_tests" / "db";
  std::filesystem::remove_all(dir);
  save_database(db, dir.string());
  const auto back = load_database(dir.string());
  ASSERT_EQ(back.index().rows(), db.index().rows());
  EXPECT_EQ(back.family(), db.family());
  for (std::size_t r = 0; r < db.index().rows(); ++r) {
    EXPECT_EQ(back.index().provenance(r), db.index().provenance(r));
    const auto x = back.index().row(r), y = db.index().row(r);
    EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin()));
  }
  EXPECT_TRUE(back.view(2, 1).view_to_model.matrix().isApprox(b.view_to_model.matrix(), 1e-15));
  EXPECT_EQ(back.view(2, 1).keypoints, b.keypoints);
}

TEST(Matching, ExactRowAndBruteForce) {
  sbtest::Rng rng(4);
  std::vector<ModelView> views;
  for (int m = 0; m < 4; ++m)
    for (int v = 0; v < 5; ++v) views.push_back(random_view(rng, m, v, 15));
  const auto db = build_database(views);
  ASSERT_EQ(db.index().rows(), 300u);

  const auto scene_view = random_view(rng, 9, 9, 200);
  auto scene = scene_view.descriptors;
  scene[0].values = views[7].descriptors[4].values;
  const auto matches = match_scene(scene, scene_view.keypoints, db);
  ASSERT_EQ(matches.size(), 200u);
  EXPECT_EQ(matches[0].distance, 0.0);
  EXPECT_EQ(matches[0].model, views[7].model);
  EXPECT_EQ(matches[0].view, views[7].view);
  EXPECT_EQ(matches[0].model_keypoint, 4u);
  EXPECT_EQ(matches[0].model_position, views[7].keypoints[4]);
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const auto oracle = sbtest::brute_nearest(db.index(), scene[i].values);
    const auto& p = db.index().provenance(oracle.row);
    EXPECT_EQ(matches[i].model, p.model);
    EXPECT_EQ(matches[i].view, p.view);
    EXPECT_EQ(matches[i].model_keypoint, p.keypoint);
    EXPECT_EQ(matches[i].distance, oracle.distance);
    EXPECT_EQ(matches[i].scene_keypoint, i);
  }

  scene[1].family = DescriptorFamily::Shot;
  EXPECT_THROW(match_scene(scene, scene_view.keypoints, db), InvalidArgument);
}

TEST(Grouping, RigidTripleAndOutlier) {
  const std::vector<Vec3> model{Vec3(0, 0, 0), Vec3(0.05, 0, 0), Vec3(0, 0.04, 0.01)};
  sbtest::Rng rng(5);
  const auto t = sbtest::random_transform(rng, 0.5);
  std::vector<Correspondence> c;
  for (const auto& m : model) c.push_back(corr(t.apply(m), m));
  auto clusters = geometric_consistency_group(c, 0.01, 3);
  ASSERT_EQ(clusters.size(), 1u);
  EXPECT_EQ(clusters[0].size(), 3u);

  c.push_back(corr(t.apply(Vec3(0.03, 0.03, 0)) + Vec3(0.1, 0, 0), Vec3(0.03, 0.03, 0)));
  clusters = geometric_consistency_group(c, 0.01, 3);
  ASSERT_EQ(clusters.size(), 1u);
  EXPECT_EQ(clusters[0].size(), 3u);
  EXPECT_THROW(geometric_consistency_group(c, 0.0, 3), InvalidArgument);
}

TEST(Grouping, MatchesExhaustiveOracle) {
  sbtest::Rng rng(6);
  std::uniform_real_distribution<double> u(0.0, 0.08);
  std::uniform_int_distribution<int> count(0, 12);
  for (int trial = 0; trial < 200; ++trial) {
    const auto t = sbtest::random_transform(rng, 0.3);
    const int n = count(rng);
    std::vector<Correspondence> c;
    for (int i = 0; i < n; ++i) {
      const Vec3 m(u(rng), u(rng), u(rng));
      const Vec3 s = (rng() % 3 == 0) ? t.apply(Vec3(u(rng), u(rng), u(rng))) : t.apply(m);
      c.push_back(corr(s, m));
    }
    const std::size_t min_size = 1 + trial % 4;
    const auto got = geometric_consistency_group(c, 0.01, min_size);
    const auto want = sbtest::exhaustive_groups(c, 0.01, min_size);
    ASSERT_EQ(got.size(), want.size()) << "trial " << trial;
    for (std::size_t g = 0; g < got.size(); ++g) {
      ASSERT_EQ(got[g].size(), want[g].size());
      EXPECT_EQ(got[g].seed, want[g].front());
      for (std::size_t k = 0; k < got[g].size(); ++k) {
        EXPECT_EQ(got[g].members[k].scene_position, c[want[g][k]].scene_position);
        for (std::size_t l = 0; l < got[g].size(); ++l)
          EXPECT_TRUE(consistent(got[g].members[k], got[g].members[l], 0.01));
      }
    }
  }
}

TEST(Pose, IdentityAndRecovery) {
  sbtest::Rng rng(7);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  std::vector<Vec3> model;
  for (int i = 0; i < 20; ++i) model.emplace_back(u(rng), u(rng), u(rng));
  const auto id = estimate_pose(model, model);
  EXPECT_LT((id.rotation - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT(id.translation.norm(), 1e-12);

  for (int trial = 0; trial < 100; ++trial) {
    const auto t = sbtest::random_transform(rng, 1.0);
    std::vector<Vec3> m, s;
    for (int i = 0; i < 3 + trial % 10; ++i) {
      m.emplace_back(u(rng), u(rng), u(rng));
      s.push_back(t.apply(m.back()));
    }
    const auto est = estimate_pose(m, s);
    EXPECT_LT(rotation_angle_between(est.rotation, t.rotation), 1e-9);
    EXPECT_LT((est.translation - t.translation).norm(), 1e-9);
  }
}

TEST(Pose, DegenerateInputs) {
  const std::vector<Vec3> two{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  EXPECT_THROW(estimate_pose(two, two), DegenerateGeometry);
  const std::vector<Vec3> line{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0)};
  EXPECT_THROW(estimate_pose(line, line), DegenerateGeometry);
}

TEST(Pose, MemberOrderInvariant) {
  sbtest::Rng rng(8);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  std::normal_distribution<double> noise(0.0, 0.001);
  const auto t = sbtest::random_transform(rng, 1.0);
  std::vector<Vec3> m, s;
  for (int i = 0; i < 15; ++i) {
    m.emplace_back(u(rng), u(rng), u(rng));
    s.push_back(t.apply(m.back()) + Vec3(noise(rng), noise(rng), noise(rng)));
  }
  const auto a = estimate_pose(m, s);
  std::vector<std::size_t> perm(m.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Vec3> pm, ps;
  for (auto i : perm) {
    pm.push_back(m[i]);
    ps.push_back(s[i]);
  }
  const auto b = estimate_pose(pm, ps);
  EXPECT_EQ(a.rotation, b.rotation);
  EXPECT_EQ(a.translation, b.translation);
}

TEST(Recognize, SelfRecognitionAndEmptyScene) {
  sbtest::Rng rng(9);
  auto v = random_view(rng, 3, 2, 25);
  v.view_to_model = sbtest::random_transform(rng, 0.1);
  auto other = random_view(rng, 1, 0, 25);
  const auto db = build_database({v, other});
  const auto dets = recognize(v.descriptors, v.keypoints, db);
  const auto hit = std::find_if(dets.begin(), dets.end(), [](const Detection& d) { return d.model == 3; });
  ASSERT_NE(hit, dets.end());
  EXPECT_EQ(hit->support, v.keypoints.size());
  EXPECT_EQ(hit->view, 2);
  // The scene is the view, so the model-to-scene pose is view_to_model^-1.
  const auto expected = v.view_to_model.inverse();
  EXPECT_LT(rotation_angle_between(hit->pose.rotation, expected.rotation), 1e-9);
  EXPECT_LT((hit->pose.translation - expected.translation).norm(), 1e-9);

  EXPECT_TRUE(recognize({}, {}, db).empty());
}
