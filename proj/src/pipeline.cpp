#include "salboost/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <optional>
#include <string>

#include "salboost/error.hpp"
#include "salboost/geometry.hpp"

namespace salboost {

std::string_view to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::Uniform: return "us";
    case DetectorKind::Iss: return "iss";
    case DetectorKind::Fast: return "fast";
  }
  return "?";
}

DetectorKind parse_detector(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "us" || lower == "uniform") return DetectorKind::Uniform;
  if (lower == "iss") return DetectorKind::Iss;
  if (lower == "fast") return DetectorKind::Fast;
  throw InvalidArgument("unknown detector '" + std::string(name) + "'");
}

StageTimes& StageTimes::operator+=(const StageTimes& o) {
  saliency += o.saliency;
  detect += o.detect;
  describe += o.describe;
  match += o.match;
  group += o.group;
  pose += o.pose;
  return *this;
}

StageTimes StageTimes::scaled(double f) const {
  return {saliency * f, detect * f, describe * f, match * f, group * f, pose * f};
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Descriptors at `keypoints` (indices into `cloud`), with normals estimated
/// only where some descriptor reads them.
std::vector<Descriptor> describe(const PointCloud& cloud, const KdTree3& tree,
                                 std::span<const std::size_t> keypoints, const PipelineConfig& config) {
  if (keypoints.empty()) return {};
  const double reach = config.descriptor == DescriptorFamily::Fpfh ? 2.0 * config.descriptor_radius
                                                                   : config.descriptor_radius;
  std::vector<std::uint8_t> needed(cloud.size(), 0);
  for (auto k : keypoints) {
    needed[k] = 1;
    for (const auto& n : tree.radius_search(cloud[k].position, reach)) needed[n.index] = 1;
  }
  std::vector<std::size_t> subset;
  for (std::size_t i = 0; i < needed.size(); ++i)
    if (needed[i]) subset.push_back(i);
  const PointCloud with_normals = estimate_normals(cloud, tree, subset, config.normal_k, config.viewpoint);
  return compute_descriptors(config.descriptor, with_normals, tree, keypoints, config.descriptor_radius);
}

Features features_3d(const PointCloud& cloud, const PipelineConfig& config, const MaskProvider& mask,
                     StageTimes& times) {
  auto t0 = Clock::now();
  SubCloud sub = mask ? filter_cloud(cloud, mask(cloud)) : valid_points(cloud);
  times.saliency += mask ? seconds_since(t0) : 0.0;

  Features out;
  if (sub.cloud.empty()) return out;

  t0 = Clock::now();
  const KdTree3 tree(sub.cloud);
  const KeypointSet kps = config.detector == DetectorKind::Iss ? iss_detect(sub.cloud, tree, config.iss)
                                                               : uniform_sampling(sub.cloud, config.uniform_leaf);
  times.detect += seconds_since(t0);

  t0 = Clock::now();
  out.descriptors = describe(sub.cloud, tree, kps.indices, config);
  for (auto k : kps.indices) {
    out.indices.push_back(sub.source_index[k]);
    out.positions.push_back(sub.cloud[k].position);
  }
  times.describe += seconds_since(t0);
  return out;
}

Features features_2d(const PointCloud& cloud, const PipelineConfig& config, const MaskProvider& mask,
                     StageTimes& times) {
  if (!cloud.organized()) throw InvalidArgument("FAST needs an organized cloud");
  auto t0 = Clock::now();
  auto corners = fast_detect(to_gray(rgb_image_of(cloud)), config.fast_threshold, config.fast_nms);
  times.detect += seconds_since(t0);

  if (mask) {
    t0 = Clock::now();
    corners = filter_keypoints_2d<FastCorner>(corners, mask(cloud));
    times.saliency += seconds_since(t0);
  }

  t0 = Clock::now();
  const KeypointSet kps = lift_to_3d(corners, cloud);
  times.detect += seconds_since(t0);

  Features out;
  if (kps.empty()) return out;
  t0 = Clock::now();
  const SubCloud sub = valid_points(cloud);
  std::vector<std::size_t> local(cloud.size(), 0);
  for (std::size_t i = 0; i < sub.source_index.size(); ++i) local[sub.source_index[i]] = i;
  std::vector<std::size_t> keypoints;
  for (auto k : kps.indices) keypoints.push_back(local[k]);
  const KdTree3 tree(sub.cloud);
  out.descriptors = describe(sub.cloud, tree, keypoints, config);
  out.indices = kps.indices;
  out.positions = kps.positions;
  times.describe += seconds_since(t0);
  return out;
}

}  // namespace

Features extract_features(const PointCloud& cloud, const PipelineConfig& config, const MaskProvider& mask,
                          StageTimes* times) {
  if (needs_rgb(config.descriptor) && !cloud.has_rgb())
    throw InvalidArgument(std::string(to_string(config.descriptor)) + " needs a cloud with RGB");
  StageTimes local;
  Features f = config.detector == DetectorKind::Fast ? features_2d(cloud, config, mask, local)
                                                     : features_3d(cloud, config, mask, local);
  if (times) *times += local;
  return f;
}

SceneRun process_scene(const PointCloud& scene, const ModelDatabase& db, const PipelineConfig& config,
                       const MaskProvider& mask) {
  if (db.family() != config.descriptor)
    throw InvalidArgument("database holds " + std::string(to_string(db.family())) + " descriptors, pipeline uses " +
                          std::string(to_string(config.descriptor)));
  SceneRun run;
  const auto start = Clock::now();
  run.features = extract_features(scene, config, mask, &run.stages);

  auto t0 = Clock::now();
  const auto matches = match_scene(run.features.descriptors, run.features.positions, db);
  run.stages.match = seconds_since(t0);

  t0 = Clock::now();
  const auto candidates = group_correspondences(matches, db, config.recognition);
  run.stages.group = seconds_since(t0);

  t0 = Clock::now();
  run.detections = estimate_detections(candidates, db);
  run.stages.pose = seconds_since(t0);
  run.total = seconds_since(start);
  return run;
}

ModelDatabase build_model_database(std::span<const RenderedView> views, const PipelineConfig& config) {
  std::vector<ModelView> out;
  for (const auto& v : views) {
    const Features f = extract_features(v.cloud, config);
    out.push_back({v.model, v.view, f.positions, f.descriptors, v.view_to_model});
  }
  return build_database(std::move(out), config.descriptor);
}

MaskProvider fixed_mask(BinaryMask mask) {
  return [mask = std::move(mask)](const PointCloud&) { return mask; };
}

MaskProvider spectral_residual_mask(double threshold, std::uint32_t dilate_px) {
  return [=](const PointCloud& cloud) {
    return binarize(spectral_residual_saliency(rgb_image_of(cloud)), threshold, dilate_px);
  };
}

}  // namespace salboost
