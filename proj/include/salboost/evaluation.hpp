#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "salboost/cloud.hpp"
#include "salboost/recognition.hpp"

namespace salboost {

struct GroundTruthEntry {
  std::string scene;
  int model = 0;
  RigidTransform pose;  // model frame -> scene frame
};

/// One entry per line: scene id, model id, 12 numbers of the row-major 3x4
/// pose. Blank lines and lines starting with '#' are ignored.
std::vector<GroundTruthEntry> load_ground_truth(const std::string& path);
void save_ground_truth(std::span<const GroundTruthEntry> entries, const std::string& path);

/// Intersection over union of two boxes. Throws DegenerateGeometry when
/// either box has zero volume.
double box_iou(const Aabb& a, const Aabb& b);

/// IoU of the axis-aligned boxes of `model` placed by the detected and the
/// ground-truth poses. Throws InvalidArgument when the model ids differ.
double detection_iou(const Detection& detection, const GroundTruthEntry& gt, const PointCloud& model);

enum class Outcome { TruePositive, FalsePositive, FalseNegative };

struct Classification {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::vector<Outcome> labels;  // one per detection
};

/// iou(d, g) for detection d and ground-truth entry g of the same model.
using IouLookup = std::function<double(std::size_t detection, std::size_t gt)>;

/// Detections are taken in order. A detection consumes the unclaimed entry
/// of its model with the highest IoU when that IoU reaches `iou_min` (TP).
/// A detection with no unclaimed entry of its model is FP; one whose best
/// IoU falls short is labeled FN. The FN count is the number of unclaimed
/// entries, so a missed object counts once however many detections miss it.
Classification classify(std::span<const Detection> detections, std::span<const GroundTruthEntry> gt,
                        const IouLookup& iou, double iou_min = 0.25);
Classification classify(std::span<const Detection> detections, std::span<const GroundTruthEntry> gt,
                        const std::map<int, PointCloud>& models, double iou_min = 0.25);

struct PrecisionRecall {
  double precision = 1.0;
  double recall = 1.0;
};

/// 0/0 precision or recall is 1.
PrecisionRecall precision_recall(std::size_t tp, std::size_t fp, std::size_t fn);

struct PrcPoint {
  std::size_t threshold = 0;
  double precision = 1.0;
  double recall = 1.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct SceneOutcome {
  std::string scene;
  std::vector<Detection> detections;
  std::vector<GroundTruthEntry> ground_truth;
};

/// Sweeps the support threshold from `start` upward. The first threshold is
/// always reported; the sweep stops at the first threshold that leaves no
/// detection in any scene.
std::vector<PrcPoint> prc_sweep(std::span<const SceneOutcome> scenes, const std::map<int, PointCloud>& models,
                                double iou_min = 0.25, std::size_t start = 3);
/// Same sweep with IoU supplied per scene.
std::vector<PrcPoint> prc_sweep(std::span<const SceneOutcome> scenes,
                                const std::function<double(std::size_t scene, std::size_t detection,
                                                           std::size_t gt)>& iou,
                                double iou_min = 0.25, std::size_t start = 3);

/// Trapezoidal area under the precision-recall curve, extended left to
/// recall 0 at the precision of the lowest-recall point. Throws
/// InvalidArgument on an empty curve.
double auc(std::span<const PrcPoint> points);

}  // namespace salboost
