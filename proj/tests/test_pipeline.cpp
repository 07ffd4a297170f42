#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "salboost/benchmark.hpp"
#include "salboost/error.hpp"
#include "salboost/pipeline.hpp"
#include "salboost/synthetic.hpp"

using namespace salboost;

namespace {

RigidTransform at_view(std::size_t view, const Vec3& where) {
  auto pose = view_pose(view, 8, 0.7, 25.0);
  pose.translation = where;
  return pose;
}

SuiteSpec small_spec() {
  SuiteSpec spec;
  spec.scenes = 2;
  spec.views_per_model = 4;
  spec.model_spacing = 0.003;
  spec.clutter.count = 3000;
  spec.seed = 99;
  return spec;
}

}  // namespace

TEST(Synthetic, ModelsAreCenteredAndColored) {
  const auto models = standard_models(0.003);
  ASSERT_EQ(models.size(), 5u);
  for (const auto& m : models) {
    EXPECT_TRUE(m.has_rgb());
    EXPECT_TRUE(m.has_normals());
    const auto box = bounding_box(m);
    EXPECT_LT(((box.min + box.max) * 0.5).norm(), 1e-9);
  }
}

TEST(Synthetic, CleanSceneIsSubsetOfModel) {
  const auto models = standard_models(0.003);
  const RigidTransform pose = at_view(0, Vec3(0, 0, 0.7));
  const std::vector<Placement> placement{{2, pose}};
  const auto scene = generate_synthetic_scene(models, placement, ClutterSpec{0, {}}, 0.0, 1);
  const auto placed = transform_cloud(models[2], pose);
  const KdTree3 tree(placed);
  ASSERT_GT(scene.cloud.valid_count(), 100u);
  for (const auto& p : scene.cloud.points())
    if (p.valid()) EXPECT_LT(tree.nearest(p.position).distance, 1e-12);
}

TEST(Synthetic, DeterministicPerSeed) {
  const auto models = standard_models(0.003);
  const std::vector<Placement> placement{{0, at_view(1, Vec3(-0.08, 0, 0.7))}, {3, at_view(5, Vec3(0.08, 0, 0.7))}};
  const ClutterSpec clutter{2000, {}};
  const auto a = generate_synthetic_scene(models, placement, clutter, 0.0005, 42);
  const auto b = generate_synthetic_scene(models, placement, clutter, 0.0005, 42);
  const auto c = generate_synthetic_scene(models, placement, clutter, 0.0005, 43);
  EXPECT_EQ(a.cloud, b.cloud);
  EXPECT_EQ(a.oracle_mask, b.oracle_mask);
  EXPECT_FALSE(a.cloud == c.cloud);
  ASSERT_EQ(a.ground_truth.size(), 2u);
  EXPECT_EQ(a.ground_truth[1].model, 3);
}

TEST(Synthetic, OracleMaskCoversEveryModelPixel) {
  const auto models = standard_models(0.003);
  const std::vector<Placement> placement{{1, at_view(2, Vec3(-0.07, 0.02, 0.68))}, {4, at_view(6, Vec3(0.09, -0.02, 0.72))}};
  const auto scene = generate_synthetic_scene(models, placement, ClutterSpec{5000, {}}, 0.0, 5);
  for (const auto& p : placement) {
    const auto alone = render_view(models[static_cast<std::size_t>(p.model)], p.pose);
    for (std::uint32_t r = 0; r < alone.height(); ++r)
      for (std::uint32_t c = 0; c < alone.width(); ++c)
        if (alone.at(r, c).valid()) EXPECT_TRUE(scene.oracle_mask.salient(r, c)) << r << "," << c;
  }
  EXPECT_LE(scene.oracle_mask.coverage(), 0.4);
}

TEST(Synthetic, RejectsBadPlacements) {
  const auto models = standard_models(0.003);
  const auto p = at_view(0, Vec3(0, 0, 0.7));
  EXPECT_THROW(generate_synthetic_scene(models, std::vector<Placement>{{0, p}, {1, p}}, {}, 0.0, 1), InvalidArgument);
  EXPECT_THROW(generate_synthetic_scene(models, std::vector<Placement>{{7, p}}, {}, 0.0, 1), InvalidArgument);
  EXPECT_THROW(generate_synthetic_scene(models, std::vector<Placement>{{0, at_view(0, Vec3(2, 0, 0.7))}}, {}, 0.0, 1),
               InvalidArgument);
}

TEST(Synthetic, SuiteSaveLoadRoundTrip) {
  const auto suite = generate_suite(small_spec());
  const auto dir = std::filesystem::temp_directory_path() / "salboost_tests" / "suite";
  std::filesystem::remove_all(dir);
  save_suite(suite, dir.string());
  const auto back = load_suite(dir.string());
  ASSERT_EQ(back.scenes.size(), suite.scenes.size());
  ASSERT_EQ(back.views.size(), suite.views.size());
  EXPECT_EQ(back.models.size(), suite.models.size());
  for (std::size_t s = 0; s < suite.scenes.size(); ++s) {
    EXPECT_EQ(back.scenes[s].id, suite.scenes[s].id);
    EXPECT_EQ(back.scenes[s].cloud, suite.scenes[s].cloud);
    EXPECT_EQ(back.scenes[s].oracle_mask, suite.scenes[s].oracle_mask);
    EXPECT_EQ(back.scenes[s].ground_truth.size(), suite.scenes[s].ground_truth.size());
  }
  EXPECT_EQ(back.views[3].cloud, suite.views[3].cloud);
}

TEST(Pipeline, DetectorNames) {
  for (auto k : {DetectorKind::Uniform, DetectorKind::Iss, DetectorKind::Fast}) EXPECT_EQ(parse_detector(to_string(k)), k);
  EXPECT_EQ(parse_detector("uniform"), DetectorKind::Uniform);
  EXPECT_THROW(parse_detector("harris"), InvalidArgument);
}

TEST(Pipeline, TwoOfFiveModelsRecognized) {
  const auto models = standard_models(0.0015);
  const auto views = render_views(models, 8, {}, 0.7, 25.0);
  PipelineConfig config;
  config.uniform_leaf = 0.01;
  const auto db = build_model_database(views, config);

  const std::vector<Placement> placement{{1, at_view(1, Vec3(-0.08, 0.0, 0.7))}, {3, at_view(6, Vec3(0.08, 0.0, 0.7))}};
  const auto scene = generate_synthetic_scene(models, placement, ClutterSpec{0, {}}, 0.0, 3);
  const auto run = process_scene(scene.cloud, db, config);
  ASSERT_EQ(run.detections.size(), 2u);
  for (const auto& d : run.detections) {
    const auto gt = std::find_if(scene.ground_truth.begin(), scene.ground_truth.end(),
                                 [&](const GroundTruthEntry& g) { return g.model == d.model; });
    ASSERT_NE(gt, scene.ground_truth.end()) << "unexpected model " << d.model;
    // Scene and view keypoints sit up to half a leaf apart, so the pose is coarse.
    EXPECT_LT((d.pose.translation - gt->pose.translation).norm(), 0.01);
    EXPECT_LT(rotation_angle_between(d.pose.rotation, gt->pose.rotation), 8.0 * M_PI / 180.0);
  }
}

TEST(Pipeline, IdentityMaskMatchesPlainRun) {
  const auto suite = generate_suite(small_spec());
  for (auto kind : {DetectorKind::Uniform, DetectorKind::Iss}) {
    PipelineConfig config;
    config.detector = kind;
    const auto db = build_model_database(suite.views, config);
    const auto& cloud = suite.scenes[0].cloud;
    const auto plain = process_scene(cloud, db, config);
    const auto boosted = process_scene(cloud, db, config, fixed_mask(full_mask(cloud.width(), cloud.height())));
    EXPECT_EQ(plain.features.indices, boosted.features.indices);
    ASSERT_EQ(plain.detections.size(), boosted.detections.size());
    for (std::size_t i = 0; i < plain.detections.size(); ++i) {
      EXPECT_EQ(plain.detections[i].model, boosted.detections[i].model);
      EXPECT_EQ(plain.detections[i].support, boosted.detections[i].support);
      EXPECT_EQ(plain.detections[i].pose.matrix(), boosted.detections[i].pose.matrix());
    }
  }
}

TEST(Pipeline, FastNeedsOrganizedColor) {
  PipelineConfig config;
  config.detector = DetectorKind::Fast;
  EXPECT_THROW(extract_features(PointCloud::unorganized({Point3(Vec3(0, 0, 1))}), config), InvalidArgument);
}

TEST(Benchmark, OneSceneOneCombo) {
  BenchConfig config;
  config.synthetic = small_spec();
  config.synthetic.scenes = 1;
  config.detectors = {DetectorKind::Uniform};
  config.descriptors = {DescriptorFamily::Shot};
  config.warmup = false;
  const auto report = run_benchmark(config);
  ASSERT_EQ(report.rows.size(), 1u);
  EXPECT_EQ(report.scenes, 1u);
  for (const auto* s : {&report.rows[0].lp, &report.rows[0].boost}) {
    ASSERT_TRUE(s->ran);
    EXPECT_NEAR(s->mean_stages.sum(), s->mean_total, 0.01 * s->mean_total);
    EXPECT_GE(s->auc, 0.0);
    EXPECT_LE(s->auc, 1.0);
  }
  EXPECT_LT(report.rows[0].boost.mean_keypoints, report.rows[0].lp.mean_keypoints);
  const auto csv = report_csv(report);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_NE(report_json(report).find("\"auc\""), std::string::npos);
}

TEST(Benchmark, PercentChange) {
  EXPECT_DOUBLE_EQ(percent_change(200.0, 50.0), -75.0);
  EXPECT_TRUE(std::isnan(percent_change(0.0, 5.0)));
}

TEST(Benchmark, ConfigParsing) {
  const auto c = parse_bench_config(R"({"synthetic": {"scenes": 3, "noise_sigma": 0.001}, "detectors": ["iss"],
                                        "descriptors": ["fpfh", "shot"], "uniform_leaf": 0.03, "epsilon": 0.02})");
  EXPECT_EQ(c.synthetic.scenes, 3u);
  EXPECT_DOUBLE_EQ(c.synthetic.noise_sigma, 0.001);
  EXPECT_EQ(c.detectors, std::vector<DetectorKind>{DetectorKind::Iss});
  EXPECT_EQ(c.descriptors, (std::vector<DescriptorFamily>{DescriptorFamily::Fpfh, DescriptorFamily::Shot}));
  EXPECT_DOUBLE_EQ(c.pipeline.uniform_leaf, 0.03);
  EXPECT_DOUBLE_EQ(c.pipeline.recognition.epsilon, 0.02);
  EXPECT_THROW(parse_bench_config(R"({"leaf": 1})"), InvalidArgument);
  EXPECT_THROW(parse_bench_config(R"({"detectors": ["sift"]})"), InvalidArgument);
  EXPECT_THROW(parse_bench_config("{"), ParseError);
}
