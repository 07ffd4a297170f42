#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "salboost/cloud.hpp"
#include "salboost/evaluation.hpp"
#include "salboost/saliency.hpp"

namespace salboost {

struct CameraIntrinsics {
  std::uint32_t width = 160;
  std::uint32_t height = 120;
  double fx = 150.0;
  double fy = 150.0;
  double cx = 79.5;
  double cy = 59.5;
};

enum class ModelShape { LBlock, Cylinder, Pyramid, TBlock, Mushroom };

/// Densely sampled colored surface with outward normals, centered on its
/// bounding box. The model's up direction is -y, matching image rows.
PointCloud make_model(ModelShape shape, double spacing = 0.0015);
/// The five shapes in enum order; model id = position.
std::vector<PointCloud> standard_models(double spacing = 0.0015);

/// Projects the model placed by `pose` (model -> camera) into an organized
/// cloud with a z-buffer. Back-facing samples are culled when the model
/// carries normals.
PointCloud render_view(const PointCloud& model, const RigidTransform& pose, const CameraIntrinsics& camera = {});

struct Placement {
  int model = 0;
  RigidTransform pose;  // model -> camera
};

struct ClutterSpec {
  std::size_t count = 40000;
  Aabb box{Vec3(-0.25, -0.15, 0.85), Vec3(0.25, 0.15, 0.9)};
};

struct SyntheticScene {
  std::string id;
  PointCloud cloud;
  std::vector<GroundTruthEntry> ground_truth;
  BinaryMask oracle_mask;
};

/// Placed models plus uniform random clutter, rendered through the camera,
/// then Gaussian noise on the visible coordinates. The oracle mask covers
/// every pixel showing a placed model, dilated by `mask_dilate` pixels.
/// Throws InvalidArgument when placements overlap, a model leaves the
/// frustum, or a model id is out of range.
SyntheticScene generate_synthetic_scene(std::span<const PointCloud> models, std::span<const Placement> placements,
                                        const ClutterSpec& clutter, double noise_sigma, std::uint64_t seed,
                                        const CameraIntrinsics& camera = {}, const std::string& id = "scene",
                                        std::uint32_t mask_dilate = 2);

struct RenderedView {
  int model = 0;
  int view = 0;
  PointCloud cloud;
  RigidTransform view_to_model;
};

struct SuiteSpec {
  std::size_t scenes = 10;
  std::size_t views_per_model = 8;
  std::size_t min_objects = 2;
  std::size_t max_objects = 3;
  double model_spacing = 0.0015;
  double view_distance = 0.7;
  double view_tilt_deg = 25.0;
  double yaw_jitter_deg = 8.0;
  double tilt_jitter_deg = 4.0;
  ClutterSpec clutter;
  double noise_sigma = 0.0005;
  std::uint32_t mask_dilate = 2;
  std::uint64_t seed = 7;
  CameraIntrinsics camera;
};

struct SyntheticSuite {
  CameraIntrinsics camera;
  std::vector<PointCloud> models;
  std::vector<RenderedView> views;
  std::vector<SyntheticScene> scenes;

  std::vector<GroundTruthEntry> ground_truth() const;
};

/// Camera pose of view `index` out of `count`: yaw steps around the up axis
/// at a fixed downward tilt, `distance` in front of the camera.
RigidTransform view_pose(std::size_t index, std::size_t count, double distance, double tilt_deg);

std::vector<RenderedView> render_views(std::span<const PointCloud> models, std::size_t per_model,
                                       const CameraIntrinsics& camera, double distance, double tilt_deg);

SyntheticSuite generate_suite(const SuiteSpec& spec);

/// Writes manifest.json, models/, views/, scenes/, masks/ and gt.txt.
void save_suite(const SyntheticSuite& suite, const std::string& directory);
SyntheticSuite load_suite(const std::string& directory);

}  // namespace salboost
