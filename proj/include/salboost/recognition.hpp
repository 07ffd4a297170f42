#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "salboost/cloud.hpp"
#include "salboost/descriptors.hpp"
#include "salboost/spatial_index.hpp"

namespace salboost {

/// One 2.5D view of a model: keypoints in the view frame and their
/// descriptors, row for row.
struct ModelView {
  int model = 0;
  int view = 0;
  std::vector<Vec3> keypoints;
  std::vector<Descriptor> descriptors;
  RigidTransform view_to_model;
};

class ModelDatabase {
 public:
  ModelDatabase() = default;

  DescriptorFamily family() const { return family_; }
  std::span<const ModelView> views() const { return views_; }
  const DescriptorIndex& index() const { return index_; }
  /// Distinct model ids, ascending.
  std::vector<int> model_ids() const;
  /// Throws InvalidArgument for an unknown pair.
  const ModelView& view(int model, int view) const;

 private:
  friend ModelDatabase build_database(std::vector<ModelView> views, std::optional<DescriptorFamily> family);

  DescriptorFamily family_ = DescriptorFamily::Shot;
  std::vector<ModelView> views_;
  std::map<std::pair<int, int>, std::size_t> lookup_;
  DescriptorIndex index_;
};

/// Throws InvalidArgument on empty input, mixed families, a repeated
/// (model, view) pair or a view whose keypoint and descriptor counts differ.
/// Without `family` the first descriptor decides it, so at least one view
/// must carry descriptors.
ModelDatabase build_database(std::vector<ModelView> views,
                             std::optional<DescriptorFamily> family = std::nullopt);

struct Correspondence {
  std::size_t scene_keypoint = 0;
  Vec3 scene_position = Vec3::Zero();
  int model = 0;
  int view = 0;
  std::size_t model_keypoint = 0;
  Vec3 model_position = Vec3::Zero();
  double distance = 0.0;
};

/// One correspondence per scene descriptor: its nearest database row.
/// Throws InvalidArgument on a family mismatch or when the position count
/// differs from the descriptor count.
std::vector<Correspondence> match_scene(std::span<const Descriptor> scene,
                                        std::span<const Vec3> scene_positions,
                                        const ModelDatabase& db);

struct Cluster {
  int model = 0;
  int view = 0;
  std::vector<Correspondence> members;
  std::size_t seed = 0;  // position of the seed in the grouped input

  std::size_t size() const { return members.size(); }
};

bool consistent(const Correspondence& a, const Correspondence& b, double epsilon);

/// Greedy geometric consistency grouping over correspondences of a single
/// (model, view). Clusters of at least `min_size`, largest first.
std::vector<Cluster> geometric_consistency_group(std::span<const Correspondence> correspondences,
                                                 double epsilon = 0.01, std::size_t min_size = 3);

/// Least-squares rigid transform taking model points onto scene points.
/// Throws DegenerateGeometry with fewer than 3 members or collinear points.
RigidTransform estimate_pose(std::span<const Vec3> model, std::span<const Vec3> scene);
RigidTransform estimate_pose(const Cluster& cluster);

struct Detection {
  int model = 0;
  int view = 0;
  RigidTransform pose;  // model frame -> scene frame
  std::size_t support = 0;
};

struct RecognitionParams {
  double epsilon = 0.01;
  std::size_t min_size = 3;
};

/// Candidate clusters per model across all of its views, best first.
using ClusterCandidates = std::map<int, std::vector<Cluster>>;

ClusterCandidates group_correspondences(std::span<const Correspondence> correspondences,
                                        const ModelDatabase& db, const RecognitionParams& params = {});

/// Pose for the best candidate of each model. A candidate whose members are
/// degenerate is skipped in favor of the next one.
std::vector<Detection> estimate_detections(const ClusterCandidates& candidates, const ModelDatabase& db);

/// match_scene, group_correspondences and estimate_detections in sequence.
std::vector<Detection> recognize(std::span<const Descriptor> scene, std::span<const Vec3> scene_positions,
                                 const ModelDatabase& db, const RecognitionParams& params = {});

/// Directory layout: manifest.json, views/m<model>_v<view>.pcd (keypoints)
/// and views/m<model>_v<view>.desc (descriptors).
void save_database(const ModelDatabase& db, const std::string& directory);
ModelDatabase load_database(const std::string& directory);

}  // namespace salboost
