#include "salboost/evaluation.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>

#include "salboost/error.hpp"

namespace salboost {

std::vector<GroundTruthEntry> load_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<GroundTruthEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    GroundTruthEntry e;
    std::string model_token;
    if (!(ss >> e.scene >> model_token)) throw ParseError::at_line(path, line_no, "expected scene and model ids");
    try {
      std::size_t used = 0;
      e.model = std::stoi(model_token, &used);
      if (used != model_token.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError::at_line(path, line_no, "model id '" + model_token + "' is not an integer");
    }
    std::array<double, 12> v{};
    for (std::size_t i = 0; i < 12; ++i) {
      std::string tok;
      if (!(ss >> tok)) throw ParseError::at_line(path, line_no, "expected 12 pose values, got " + std::to_string(i));
      try {
        std::size_t used = 0;
        v[i] = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError::at_line(path, line_no, "bad number '" + tok + "'");
      }
    }
    std::string extra;
    if (ss >> extra) throw ParseError::at_line(path, line_no, "unexpected token '" + extra + "'");
    try {
      e.pose = RigidTransform::from_row_major_3x4(v);
    } catch (const InvalidArgument& err) {
      throw ParseError::at_line(path, line_no, err.what());
    }
    out.push_back(std::move(e));
  }
  return out;
}

void save_ground_truth(std::span<const GroundTruthEntry> entries, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << std::setprecision(17);
  for (const auto& e : entries) {
    if (e.scene.empty() || e.scene.find_first_of(" \t\r\n") != std::string::npos || e.scene[0] == '#')
      throw InvalidArgument("scene id '" + e.scene + "' cannot be written as a token");
    out << e.scene << ' ' << e.model;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out << ' ' << e.pose.rotation(r, c);
      out << ' ' << e.pose.translation(r);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

double box_iou(const Aabb& a, const Aabb& b) {
  const double va = a.volume(), vb = b.volume();
  if (!(va > 0) || !(vb > 0)) throw DegenerateGeometry("bounding box has zero volume");
  const double inter = a.intersection_volume(b);
  return std::clamp(inter / (va + vb - inter), 0.0, 1.0);
}

namespace {

Aabb placed_box(const PointCloud& model, const RigidTransform& pose) {
  std::vector<Vec3> pts;
  pts.reserve(model.size());
  for (const auto& p : model.points())
    if (p.valid()) pts.push_back(pose.apply(p.position));
  return bounding_box(pts);
}

const PointCloud& model_cloud(const std::map<int, PointCloud>& models, int id) {
  auto it = models.find(id);
  if (it == models.end()) throw InvalidArgument("no cloud for model " + std::to_string(id));
  return it->second;
}

/// IoU table [detection][gt]; NaN where the model ids differ.
std::vector<std::vector<double>> iou_table(std::span<const Detection> dets, std::span<const GroundTruthEntry> gt,
                                           const std::map<int, PointCloud>& models) {
  std::vector<std::vector<double>> table(dets.size(), std::vector<double>(gt.size(), kNaN));
  std::map<std::size_t, Aabb> gt_boxes;
  for (std::size_t d = 0; d < dets.size(); ++d) {
    std::optional<Aabb> det_box;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (gt[g].model != dets[d].model) continue;
      const auto& model = model_cloud(models, dets[d].model);
      if (!det_box) det_box = placed_box(model, dets[d].pose);
      auto it = gt_boxes.find(g);
      if (it == gt_boxes.end()) it = gt_boxes.emplace(g, placed_box(model, gt[g].pose)).first;
      table[d][g] = box_iou(*det_box, it->second);
    }
  }
  return table;
}

}  // namespace

double detection_iou(const Detection& detection, const GroundTruthEntry& gt, const PointCloud& model) {
  if (detection.model != gt.model)
    throw InvalidArgument("detection of model " + std::to_string(detection.model) +
                          " compared with ground truth of model " + std::to_string(gt.model));
  return box_iou(placed_box(model, detection.pose), placed_box(model, gt.pose));
}

Classification classify(std::span<const Detection> detections, std::span<const GroundTruthEntry> gt,
                        const IouLookup& iou, double iou_min) {
  Classification out;
  std::vector<std::uint8_t> claimed(gt.size(), 0);
  for (std::size_t d = 0; d < detections.size(); ++d) {
    double best = -1.0;
    std::size_t best_g = gt.size();
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (claimed[g] || gt[g].model != detections[d].model) continue;
      const double v = iou(d, g);
      if (v > best) {
        best = v;
        best_g = g;
      }
    }
    if (best_g == gt.size()) {
      out.labels.push_back(Outcome::FalsePositive);
      ++out.fp;
    } else if (best >= iou_min) {
      claimed[best_g] = 1;
      out.labels.push_back(Outcome::TruePositive);
      ++out.tp;
    } else {
      // The missed object is counted once, through its unclaimed entry.
      out.labels.push_back(Outcome::FalseNegative);
    }
  }
  out.fn = static_cast<std::size_t>(std::count(claimed.begin(), claimed.end(), 0));
  return out;
}

Classification classify(std::span<const Detection> detections, std::span<const GroundTruthEntry> gt,
                        const std::map<int, PointCloud>& models, double iou_min) {
  const auto table = iou_table(detections, gt, models);
  return classify(detections, gt, [&](std::size_t d, std::size_t g) { return table[d][g]; }, iou_min);
}

PrecisionRecall precision_recall(std::size_t tp, std::size_t fp, std::size_t fn) {
  PrecisionRecall pr;
  if (tp + fp > 0) pr.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) pr.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return pr;
}

std::vector<PrcPoint> prc_sweep(
    std::span<const SceneOutcome> scenes,
    const std::function<double(std::size_t scene, std::size_t detection, std::size_t gt)>& iou, double iou_min,
    std::size_t start) {
  std::vector<PrcPoint> out;
  for (std::size_t theta = start;; ++theta) {
    PrcPoint point;
    point.threshold = theta;
    bool any = false;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      std::vector<Detection> kept;
      std::vector<std::size_t> original;
      for (std::size_t d = 0; d < scenes[s].detections.size(); ++d) {
        if (scenes[s].detections[d].support >= theta) {
          kept.push_back(scenes[s].detections[d]);
          original.push_back(d);
        }
      }
      any = any || !kept.empty();
      const auto c = classify(
          kept, scenes[s].ground_truth, [&](std::size_t d, std::size_t g) { return iou(s, original[d], g); },
          iou_min);
      point.tp += c.tp;
      point.fp += c.fp;
      point.fn += c.fn;
    }
    if (!any && theta > start) break;
    const auto pr = precision_recall(point.tp, point.fp, point.fn);
    point.precision = pr.precision;
    point.recall = pr.recall;
    out.push_back(point);
    if (!any) break;
  }
  return out;
}

std::vector<PrcPoint> prc_sweep(std::span<const SceneOutcome> scenes, const std::map<int, PointCloud>& models,
                                double iou_min, std::size_t start) {
  std::vector<std::vector<std::vector<double>>> tables;
  tables.reserve(scenes.size());
  for (const auto& s : scenes) tables.push_back(iou_table(s.detections, s.ground_truth, models));
  return prc_sweep(
      scenes, [&](std::size_t s, std::size_t d, std::size_t g) { return tables[s][d][g]; }, iou_min, start);
}

double auc(std::span<const PrcPoint> points) {
  if (points.empty()) throw InvalidArgument("AUC needs at least one curve point");
  std::vector<std::pair<double, double>> curve;  // (recall, precision)
  for (const auto& p : points) curve.emplace_back(p.recall, p.precision);
  std::sort(curve.begin(), curve.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto& [r, p] : curve) {
    if (!merged.empty() && merged.back().first == r)
      merged.back().second = std::max(merged.back().second, p);
    else
      merged.emplace_back(r, p);
  }
  double area = 0.0;
  double prev_r = 0.0, prev_p = merged.front().second;
  for (const auto& [r, p] : merged) {
    area += (r - prev_r) * (prev_p + p) * 0.5;
    prev_r = r;
    prev_p = p;
  }
  return std::clamp(area, 0.0, 1.0);
}

}  // namespace salboost
