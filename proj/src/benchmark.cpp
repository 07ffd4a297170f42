#include "salboost/benchmark.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "salboost/error.hpp"

namespace salboost {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw InvalidArgument("unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& dest) {
  if (j.contains(key)) dest = j.at(key).get<T>();
}

Vec3 read_vec3(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw InvalidArgument("expected 3 numbers");
  return {v[0], v[1], v[2]};
}

}  // namespace

BenchConfig parse_bench_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError::at_byte("config", e.byte, e.what());
  }
  BenchConfig c;
  try {
    check_keys(root,
               {"dataset", "synthetic", "detectors", "descriptors", "pipelines", "mask", "saliency_threshold",
                "saliency_dilate", "uniform_leaf", "iss", "fast_threshold", "fast_nms", "descriptor_radius",
                "normal_k", "epsilon", "min_size", "iou_min", "warmup", "scene_limit"},
               "config");
    if (root.contains("dataset")) c.dataset = root.at("dataset").get<std::string>();
    if (root.contains("synthetic")) {
      const auto& s = root.at("synthetic");
      check_keys(s,
                 {"scenes", "views_per_model", "min_objects", "max_objects", "model_spacing", "view_distance",
                  "view_tilt_deg", "yaw_jitter_deg", "tilt_jitter_deg", "clutter", "clutter_min", "clutter_max",
                  "noise_sigma", "mask_dilate", "seed", "camera"},
                 "synthetic");
      auto& spec = c.synthetic;
      read(s, "scenes", spec.scenes);
      read(s, "views_per_model", spec.views_per_model);
      read(s, "min_objects", spec.min_objects);
      read(s, "max_objects", spec.max_objects);
      read(s, "model_spacing", spec.model_spacing);
      read(s, "view_distance", spec.view_distance);
      read(s, "view_tilt_deg", spec.view_tilt_deg);
      read(s, "yaw_jitter_deg", spec.yaw_jitter_deg);
      read(s, "tilt_jitter_deg", spec.tilt_jitter_deg);
      read(s, "clutter", spec.clutter.count);
      if (s.contains("clutter_min")) spec.clutter.box.min = read_vec3(s.at("clutter_min"));
      if (s.contains("clutter_max")) spec.clutter.box.max = read_vec3(s.at("clutter_max"));
      read(s, "noise_sigma", spec.noise_sigma);
      read(s, "mask_dilate", spec.mask_dilate);
      read(s, "seed", spec.seed);
      if (s.contains("camera")) {
        const auto& cam = s.at("camera");
        check_keys(cam, {"width", "height", "fx", "fy", "cx", "cy"}, "camera");
        read(cam, "width", spec.camera.width);
        read(cam, "height", spec.camera.height);
        read(cam, "fx", spec.camera.fx);
        read(cam, "fy", spec.camera.fy);
        read(cam, "cx", spec.camera.cx);
        read(cam, "cy", spec.camera.cy);
      }
    }
    if (root.contains("detectors")) {
      c.detectors.clear();
      for (const auto& d : root.at("detectors")) c.detectors.push_back(parse_detector(d.get<std::string>()));
    }
    if (root.contains("descriptors")) {
      c.descriptors.clear();
      for (const auto& d : root.at("descriptors"))
        c.descriptors.push_back(parse_descriptor_family(d.get<std::string>()));
    }
    if (root.contains("pipelines")) {
      c.run_lp = c.run_boost = false;
      for (const auto& p : root.at("pipelines")) {
        const auto name = p.get<std::string>();
        if (name == "lp") c.run_lp = true;
        else if (name == "boost") c.run_boost = true;
        else throw InvalidArgument("unknown pipeline '" + name + "' (expected lp or boost)");
      }
    }
    if (root.contains("mask")) {
      const auto m = root.at("mask").get<std::string>();
      if (m == "oracle") c.mask = MaskSource::Oracle;
      else if (m == "spectral") c.mask = MaskSource::SpectralResidual;
      else throw InvalidArgument("unknown mask source '" + m + "' (expected oracle or spectral)");
    }
    read(root, "saliency_threshold", c.saliency_threshold);
    read(root, "saliency_dilate", c.saliency_dilate);
    read(root, "uniform_leaf", c.pipeline.uniform_leaf);
    if (root.contains("iss")) {
      const auto& iss = root.at("iss");
      check_keys(iss, {"salient_radius", "nms_radius", "gamma21", "gamma32", "min_neighbors"}, "iss");
      read(iss, "salient_radius", c.pipeline.iss.salient_radius);
      read(iss, "nms_radius", c.pipeline.iss.nms_radius);
      read(iss, "gamma21", c.pipeline.iss.gamma21);
      read(iss, "gamma32", c.pipeline.iss.gamma32);
      read(iss, "min_neighbors", c.pipeline.iss.min_neighbors);
    }
    read(root, "fast_threshold", c.pipeline.fast_threshold);
    read(root, "fast_nms", c.pipeline.fast_nms);
    read(root, "descriptor_radius", c.pipeline.descriptor_radius);
    read(root, "normal_k", c.pipeline.normal_k);
    read(root, "epsilon", c.pipeline.recognition.epsilon);
    read(root, "min_size", c.pipeline.recognition.min_size);
    read(root, "iou_min", c.iou_min);
    read(root, "warmup", c.warmup);
    if (root.contains("scene_limit")) c.scene_limit = root.at("scene_limit").get<std::size_t>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  if (c.detectors.empty() || c.descriptors.empty()) throw InvalidArgument("config names no detector or descriptor");
  if (!c.run_lp && !c.run_boost) throw InvalidArgument("config enables no pipeline");
  if (!(c.pipeline.descriptor_radius > 0) || !(c.pipeline.uniform_leaf > 0) || !(c.pipeline.recognition.epsilon > 0))
    throw InvalidArgument("radius, leaf and epsilon must be positive");
  if (!(c.iou_min > 0 && c.iou_min <= 1)) throw InvalidArgument("iou_min must lie in (0, 1]");
  return c;
}

BenchConfig load_bench_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_bench_config(ss.str());
}

double percent_change(double lp, double boost) {
  if (!(lp != 0) || !std::isfinite(lp) || !std::isfinite(boost)) return kNaN;
  return (boost - lp) / lp * 100.0;
}

namespace {

PipelineSummary run_pipeline(const SyntheticSuite& suite, std::size_t scene_count, const ModelDatabase& db,
                             const PipelineConfig& config, const BenchConfig& bench, bool boosted,
                             const std::map<int, PointCloud>& models) {
  auto provider_for = [&](const SyntheticScene& s) -> MaskProvider {
    if (!boosted) return {};
    if (bench.mask == MaskSource::Oracle) return fixed_mask(s.oracle_mask);
    return spectral_residual_mask(bench.saliency_threshold, bench.saliency_dilate);
  };
  if (bench.warmup && scene_count > 0) process_scene(suite.scenes[0].cloud, db, config, provider_for(suite.scenes[0]));

  PipelineSummary out;
  out.ran = true;
  for (std::size_t i = 0; i < scene_count; ++i) {
    const auto& scene = suite.scenes[i];
    const auto provider = provider_for(scene);
    const SceneRun run = process_scene(scene.cloud, db, config, provider);
    out.mean_keypoints += static_cast<double>(run.features.indices.size());
    out.mean_stages += run.stages;
    out.mean_total += run.total;
    out.scenes.push_back({scene.id, run.detections, scene.ground_truth});
  }
  if (scene_count > 0) {
    const double inv = 1.0 / static_cast<double>(scene_count);
    out.mean_keypoints *= inv;
    out.mean_stages = out.mean_stages.scaled(inv);
    out.mean_total *= inv;
  }
  out.prc = prc_sweep(out.scenes, models, bench.iou_min, config.recognition.min_size);
  out.auc = auc(out.prc);
  return out;
}

}  // namespace

EvalReport run_benchmark(const SyntheticSuite& suite, const BenchConfig& config, const ProgressFn& progress) {
  if (suite.scenes.empty()) throw InvalidArgument("benchmark needs at least one scene");
  if (suite.views.empty()) throw InvalidArgument("benchmark needs model views");
  const std::size_t scene_count = std::min(suite.scenes.size(), config.scene_limit.value_or(suite.scenes.size()));
  std::map<int, PointCloud> models;
  for (std::size_t m = 0; m < suite.models.size(); ++m) models.emplace(static_cast<int>(m), suite.models[m]);

  EvalReport report;
  report.scenes = scene_count;
  report.epsilon = config.pipeline.recognition.epsilon;
  report.iou_min = config.iou_min;
  report.mask_source = config.mask == MaskSource::Oracle ? "oracle" : "spectral";
  for (auto detector : config.detectors) {
    for (auto descriptor : config.descriptors) {
      PipelineConfig pc = config.pipeline;
      pc.detector = detector;
      pc.descriptor = descriptor;
      const std::string name = std::string(to_string(detector)) + "/" + std::string(to_string(descriptor));
      if (progress) progress(name + ": building database");
      const ModelDatabase db = build_model_database(suite.views, pc);
      ComboReport row{detector, descriptor, db.index().rows(), {}, {}};
      if (config.run_lp) {
        if (progress) progress(name + ": plain pipeline");
        row.lp = run_pipeline(suite, scene_count, db, pc, config, false, models);
      }
      if (config.run_boost) {
        if (progress) progress(name + ": boosted pipeline");
        row.boost = run_pipeline(suite, scene_count, db, pc, config, true, models);
      }
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

EvalReport run_benchmark(const BenchConfig& config, const ProgressFn& progress) {
  if (config.dataset) {
    if (progress) progress("loading " + *config.dataset);
    return run_benchmark(load_suite(*config.dataset), config, progress);
  }
  if (progress) progress("generating synthetic suite");
  return run_benchmark(generate_suite(config.synthetic), config, progress);
}

namespace {

double field_or_nan(const PipelineSummary& s, double v) { return s.ran ? v : kNaN; }

std::string number(double v) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream ss;
  ss << std::setprecision(10) << v;
  return ss.str();
}

json json_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json summary_json(const PipelineSummary& s) {
  if (!s.ran) return nullptr;
  json prc = json::array();
  for (const auto& p : s.prc)
    prc.push_back({{"threshold", p.threshold}, {"precision", p.precision}, {"recall", p.recall}, {"tp", p.tp},
                   {"fp", p.fp}, {"fn", p.fn}});
  json detections = json::array();
  for (const auto& sc : s.scenes) {
    json list = json::array();
    for (const auto& d : sc.detections) {
      const Mat4 m = d.pose.matrix();
      std::vector<double> flat;
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) flat.push_back(m(r, c));
      list.push_back({{"model", d.model}, {"view", d.view}, {"support", d.support}, {"pose", flat}});
    }
    detections.push_back({{"scene", sc.scene}, {"detections", list}});
  }
  return {{"mean_keypoints", s.mean_keypoints},
          {"mean_time", s.mean_total},
          {"stages",
           {{"saliency", s.mean_stages.saliency},
            {"detect", s.mean_stages.detect},
            {"describe", s.mean_stages.describe},
            {"match", s.mean_stages.match},
            {"group", s.mean_stages.group},
            {"pose", s.mean_stages.pose}}},
          {"auc", s.auc},
          {"prc", prc},
          {"scenes", detections}};
}

}  // namespace

std::string report_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "detector,descriptor,keypoints_lp,keypoints_boost,keypoints_pct,time_lp,time_boost,time_pct,"
         "auc_lp,auc_boost,auc_pct,saliency_boost,detect_lp,detect_boost,describe_lp,describe_boost,"
         "match_lp,match_boost,group_lp,group_boost,pose_lp,pose_boost,epsilon\n";
  for (const auto& r : report.rows) {
    const double kl = field_or_nan(r.lp, r.lp.mean_keypoints), kb = field_or_nan(r.boost, r.boost.mean_keypoints);
    const double tl = field_or_nan(r.lp, r.lp.mean_total), tb = field_or_nan(r.boost, r.boost.mean_total);
    const double al = field_or_nan(r.lp, r.lp.auc), ab = field_or_nan(r.boost, r.boost.auc);
    const auto& sl = r.lp.mean_stages;
    const auto& sb = r.boost.mean_stages;
    auto lp = [&](double v) { return number(field_or_nan(r.lp, v)); };
    auto bo = [&](double v) { return number(field_or_nan(r.boost, v)); };
    out << to_string(r.detector) << ',' << to_string(r.descriptor) << ',' << number(kl) << ',' << number(kb) << ','
        << number(percent_change(kl, kb)) << ',' << number(tl) << ',' << number(tb) << ','
        << number(percent_change(tl, tb)) << ',' << number(al) << ',' << number(ab) << ','
        << number(percent_change(al, ab)) << ',' << bo(sb.saliency) << ',' << lp(sl.detect) << ','
        << bo(sb.detect) << ',' << lp(sl.describe) << ',' << bo(sb.describe) << ',' << lp(sl.match) << ','
        << bo(sb.match) << ',' << lp(sl.group) << ',' << bo(sb.group) << ',' << lp(sl.pose) << ','
        << bo(sb.pose) << ',' << number(report.epsilon) << '\n';
  }
  return out.str();
}

std::string report_json(const EvalReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"detector", std::string(to_string(r.detector))},
                    {"descriptor", std::string(to_string(r.descriptor))},
                    {"database_rows", r.database_rows},
                    {"lp", summary_json(r.lp)},
                    {"boost", summary_json(r.boost)},
                    {"keypoints_pct", json_number(percent_change(field_or_nan(r.lp, r.lp.mean_keypoints),
                                                                 field_or_nan(r.boost, r.boost.mean_keypoints)))},
                    {"time_pct", json_number(percent_change(field_or_nan(r.lp, r.lp.mean_total),
                                                            field_or_nan(r.boost, r.boost.mean_total)))},
                    {"auc_pct", json_number(percent_change(field_or_nan(r.lp, r.lp.auc),
                                                           field_or_nan(r.boost, r.boost.auc)))}});
  }
  json root{{"scenes", report.scenes},
            {"epsilon", report.epsilon},
            {"iou_min", report.iou_min},
            {"mask", report.mask_source},
            {"rows", rows}};
  return root.dump(2) + "\n";
}

}  // namespace salboost
