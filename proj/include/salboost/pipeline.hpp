#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "salboost/cloud.hpp"
#include "salboost/descriptors.hpp"
#include "salboost/detectors.hpp"
#include "salboost/recognition.hpp"
#include "salboost/saliency.hpp"
#include "salboost/synthetic.hpp"

namespace salboost {

enum class DetectorKind { Uniform, Iss, Fast };

std::string_view to_string(DetectorKind kind);
/// Accepts "us", "uniform", "iss", "fast". Throws InvalidArgument otherwise.
DetectorKind parse_detector(std::string_view name);

struct PipelineConfig {
  DetectorKind detector = DetectorKind::Uniform;
  DescriptorFamily descriptor = DescriptorFamily::Shot;
  double uniform_leaf = 0.02;
  IssParams iss;
  int fast_threshold = 20;
  bool fast_nms = true;
  double descriptor_radius = kDefaultDescriptorRadius;
  std::size_t normal_k = 10;
  Vec3 viewpoint = Vec3::Zero();
  RecognitionParams recognition;
};

/// Wall-clock seconds per stage.
struct StageTimes {
  double saliency = 0.0;
  double detect = 0.0;
  double describe = 0.0;
  double match = 0.0;
  double group = 0.0;
  double pose = 0.0;

  double sum() const { return saliency + detect + describe + match + group + pose; }
  StageTimes& operator+=(const StageTimes& o);
  StageTimes scaled(double factor) const;
};

struct Features {
  std::vector<std::size_t> indices;  // into the input cloud
  std::vector<Vec3> positions;
  std::vector<Descriptor> descriptors;
};

/// Produces the salient-region mask for a scene; called inside the timed
/// saliency stage.
using MaskProvider = std::function<BinaryMask(const PointCloud&)>;

/// Keypoints and descriptors of `cloud`. With a mask provider the cloud (3D
/// detectors) or the detected pixels (FAST) are restricted to the salient
/// region first. FAST needs an organized cloud with RGB.
Features extract_features(const PointCloud& cloud, const PipelineConfig& config, const MaskProvider& mask = {},
                          StageTimes* times = nullptr);

struct SceneRun {
  Features features;
  std::vector<Detection> detections;
  StageTimes stages;
  double total = 0.0;
};

/// The whole pipeline on one scene; `mask` empty runs the plain pipeline.
SceneRun process_scene(const PointCloud& scene, const ModelDatabase& db, const PipelineConfig& config,
                       const MaskProvider& mask = {});

/// Database of every view described with the configured detector and
/// descriptor. Keypoints are stored in the view frame.
ModelDatabase build_model_database(std::span<const RenderedView> views, const PipelineConfig& config);

/// Mask provider returning a fixed mask.
MaskProvider fixed_mask(BinaryMask mask);
/// Mask provider computing spectral-residual saliency on the scene colors.
MaskProvider spectral_residual_mask(double threshold = 0.5, std::uint32_t dilate_px = 8);

}  // namespace salboost
