#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "salboost/benchmark.hpp"
#include "salboost/error.hpp"
#include "salboost/evaluation.hpp"
#include "salboost/io.hpp"
#include "salboost/pipeline.hpp"
#include "salboost/recognition.hpp"
#include "salboost/saliency.hpp"
#include "salboost/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace salboost;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

json pose_json(const RigidTransform& t) {
  const Mat4 m = t.matrix();
  json flat = json::array();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) flat.push_back(m(r, c));
  return flat;
}

RigidTransform pose_from_json(const json& j) {
  const auto flat = j.get<std::vector<double>>();
  if (flat.size() != 16 && flat.size() != 12) throw InvalidArgument("pose needs 16 or 12 numbers");
  return RigidTransform::from_row_major_3x4(std::span<const double>(flat.data(), 12));
}

// Pipeline parameters shared by build-db and recognize.
struct PipelineFlags {
  std::string detector = "us";
  std::string descriptor = "shot";
  double leaf = 0.02;
  double iss_salient = 0.01;
  double iss_nms = 0.006;
  int fast_threshold = 20;
  double radius = kDefaultDescriptorRadius;
  std::size_t normal_k = 10;
  double epsilon = 0.01;
  std::size_t min_size = 3;

  void attach(CLI::App* app) {
    app->add_option("--detector", detector, "us, iss or fast")->capture_default_str();
    app->add_option("--descriptor", descriptor, "shot, cshot, fpfh or pfhrgb")->capture_default_str();
    app->add_option("--leaf", leaf, "uniform sampling leaf (m)")->capture_default_str();
    app->add_option("--iss-salient-radius", iss_salient)->capture_default_str();
    app->add_option("--iss-nms-radius", iss_nms)->capture_default_str();
    app->add_option("--fast-threshold", fast_threshold)->capture_default_str();
    app->add_option("--radius", radius, "descriptor support radius (m)")->capture_default_str();
    app->add_option("--normal-k", normal_k)->capture_default_str();
    app->add_option("--epsilon", epsilon, "grouping tolerance (m)")->capture_default_str();
    app->add_option("--min-size", min_size, "minimum cluster size")->capture_default_str();
  }

  PipelineConfig config() const {
    PipelineConfig c;
    c.detector = parse_detector(detector);
    c.descriptor = parse_descriptor_family(descriptor);
    c.uniform_leaf = leaf;
    c.iss.salient_radius = iss_salient;
    c.iss.nms_radius = iss_nms;
    c.fast_threshold = fast_threshold;
    c.descriptor_radius = radius;
    c.normal_k = normal_k;
    c.recognition = {epsilon, min_size};
    return c;
  }

  json to_json() const {
    return {{"detector", detector}, {"descriptor", descriptor}, {"leaf", leaf}, {"iss_salient_radius", iss_salient},
            {"iss_nms_radius", iss_nms}, {"fast_threshold", fast_threshold}, {"radius", radius},
            {"normal_k", normal_k}};
  }

  void from_json(const json& j, const CLI::App* app) {
    auto take = [&](const char* key, const char* flag, auto& dest) {
      if (j.contains(key) && app->count(flag) == 0) dest = j.at(key).get<std::decay_t<decltype(dest)>>();
    };
    take("detector", "--detector", detector);
    take("descriptor", "--descriptor", descriptor);
    take("leaf", "--leaf", leaf);
    take("iss_salient_radius", "--iss-salient-radius", iss_salient);
    take("iss_nms_radius", "--iss-nms-radius", iss_nms);
    take("fast_threshold", "--fast-threshold", fast_threshold);
    take("radius", "--radius", radius);
    take("normal_k", "--normal-k", normal_k);
  }
};

json detections_json(const std::string& scene, const std::vector<Detection>& dets) {
  json list = json::array();
  for (const auto& d : dets)
    list.push_back({{"model", d.model}, {"view", d.view}, {"support", d.support}, {"pose", pose_json(d.pose)}});
  return {{"scene", scene}, {"detections", list}};
}

std::map<int, PointCloud> load_models(const std::string& dataset, const std::string& models_dir) {
  std::map<int, PointCloud> models;
  if (!dataset.empty()) {
    const auto manifest = json::parse(read_text((fs::path(dataset) / "manifest.json").string()));
    for (const auto& m : manifest.at("models"))
      models.emplace(m.at("id").get<int>(), load_cloud((fs::path(dataset) / m.at("cloud").get<std::string>()).string()));
    return models;
  }
  for (const auto& entry : fs::directory_iterator(models_dir)) {
    const std::string name = entry.path().filename().string();
    int id = 0;
    char tail[8] = {};
    if (std::sscanf(name.c_str(), "model_%d.%7s", &id, tail) == 2) models.emplace(id, load_cloud(entry.path().string()));
  }
  if (models.empty()) throw InvalidArgument("no model_<id> clouds in " + models_dir);
  return models;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-cloud object recognition with a saliency pre-filter"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset (models, views, scenes, masks, gt)");
  std::string synth_out, synth_config;
  SuiteSpec spec;
  synth->add_option("-o,--out", synth_out, "output directory")->required();
  synth->add_option("--config", synth_config, "JSON file with a synthetic spec (bench config 'synthetic' keys)");
  synth->add_option("--scenes", spec.scenes)->capture_default_str();
  synth->add_option("--views", spec.views_per_model, "views per model")->capture_default_str();
  synth->add_option("--clutter", spec.clutter.count, "clutter points per scene")->capture_default_str();
  synth->add_option("--noise", spec.noise_sigma, "coordinate noise sigma (m)")->capture_default_str();
  synth->add_option("--seed", spec.seed)->capture_default_str();

  // build-db
  auto* build = app.add_subcommand("build-db", "describe the views of a dataset into a model database");
  std::string build_dataset, build_out;
  PipelineFlags build_flags;
  build->add_option("--dataset", build_dataset, "dataset directory written by synth")->required();
  build->add_option("-o,--out", build_out, "database directory")->required();
  build_flags.attach(build);

  // recognize
  auto* rec = app.add_subcommand("recognize", "recognize models in one scene, detections as JSON");
  std::string rec_scene, rec_db, rec_mask, rec_out, rec_id;
  bool rec_saliency = false;
  double rec_threshold = 0.5;
  std::uint32_t rec_dilate = 8;
  PipelineFlags rec_flags;
  rec->add_option("--scene", rec_scene, "organized scene cloud (PCD/PLY)")->required();
  rec->add_option("--db", rec_db, "database directory")->required();
  rec->add_option("--mask", rec_mask, "salient-region mask (PGM); enables the boosted pipeline");
  rec->add_flag("--saliency", rec_saliency, "compute a spectral-residual mask; enables the boosted pipeline");
  rec->add_option("--threshold", rec_threshold, "saliency threshold")->capture_default_str();
  rec->add_option("--dilate", rec_dilate, "mask dilation (px)")->capture_default_str();
  rec->add_option("--scene-id", rec_id, "scene id in the output (default: file stem)");
  rec->add_option("-o,--out", rec_out, "output JSON (default stdout)");
  rec_flags.attach(rec);

  // bench
  auto* bench = app.add_subcommand("bench", "run the LP/Boost benchmark");
  std::string bench_config, bench_csv, bench_json;
  bench->add_option("--config", bench_config, "JSON config file");
  bench->add_option("--csv", bench_csv, "CSV report path")->required();
  bench->add_option("--json", bench_json, "JSON report path");
  bool bench_quiet = false;
  bench->add_flag("-q,--quiet", bench_quiet);

  // eval
  auto* eval = app.add_subcommand("eval", "precision-recall sweep and AUC of detections against ground truth");
  std::string eval_dets, eval_gt, eval_dataset, eval_models, eval_out;
  double eval_iou = 0.25;
  std::size_t eval_start = 3;
  eval->add_option("--detections", eval_dets, "detections JSON (one scene object or an array)")->required();
  eval->add_option("--gt", eval_gt, "ground-truth text file")->required();
  eval->add_option("--dataset", eval_dataset, "dataset directory providing model clouds");
  eval->add_option("--models", eval_models, "directory of model_<id>.pcd clouds");
  eval->add_option("--iou", eval_iou)->capture_default_str();
  eval->add_option("--min-threshold", eval_start)->capture_default_str();
  eval->add_option("-o,--out", eval_out, "output JSON (default stdout)");

  // saliency
  auto* sal = app.add_subcommand("saliency", "spectral-residual saliency of an image or organized cloud");
  std::string sal_in, sal_out;
  double sal_threshold = 0.0;
  std::uint32_t sal_dilate = 0;
  sal->add_option("input", sal_in, "PGM/PPM image or organized PCD/PLY cloud")->required();
  sal->add_option("-o,--out", sal_out, "output PGM")->required();
  sal->add_option("--threshold", sal_threshold, "binarize at this value (0 keeps the continuous map)");
  sal->add_option("--dilate", sal_dilate, "dilation of the binary mask (px)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      if (!synth_config.empty()) {
        const auto j = json::parse(read_text(synth_config));
        auto cfg = parse_bench_config(json{{"synthetic", j.contains("synthetic") ? j.at("synthetic") : j}}.dump());
        const SuiteSpec base = cfg.synthetic;
        if (synth->count("--scenes") == 0) spec.scenes = base.scenes;
        if (synth->count("--views") == 0) spec.views_per_model = base.views_per_model;
        if (synth->count("--clutter") == 0) spec.clutter.count = base.clutter.count;
        if (synth->count("--noise") == 0) spec.noise_sigma = base.noise_sigma;
        if (synth->count("--seed") == 0) spec.seed = base.seed;
        const auto keep = spec;
        spec = base;
        spec.scenes = keep.scenes;
        spec.views_per_model = keep.views_per_model;
        spec.clutter.count = keep.clutter.count;
        spec.noise_sigma = keep.noise_sigma;
        spec.seed = keep.seed;
      }
      const auto suite = generate_suite(spec);
      save_suite(suite, synth_out);
      std::cerr << "wrote " << suite.scenes.size() << " scenes, " << suite.views.size() << " views to " << synth_out
                << '\n';
    } else if (*build) {
      const auto suite = load_suite(build_dataset);
      const auto db = build_model_database(suite.views, build_flags.config());
      save_database(db, build_out);
      write_text((fs::path(build_out) / "pipeline.json").string(), build_flags.to_json().dump(2) + "\n");
      std::cerr << "database: " << db.views().size() << " views, " << db.index().rows() << " descriptors\n";
    } else if (*rec) {
      const auto sidecar = fs::path(rec_db) / "pipeline.json";
      if (fs::exists(sidecar)) rec_flags.from_json(json::parse(read_text(sidecar.string())), rec);
      const auto config = rec_flags.config();
      const auto db = load_database(rec_db);
      const auto scene = load_cloud(rec_scene);
      MaskProvider provider;
      if (!rec_mask.empty()) {
        provider = fixed_mask(binarize(load_mask(rec_mask, ImageSize{scene.width(), scene.height()}), 0.5, rec_dilate));
      } else if (rec_saliency) {
        provider = spectral_residual_mask(rec_threshold, rec_dilate);
      }
      const auto run = process_scene(scene, db, config, provider);
      auto out = detections_json(rec_id.empty() ? fs::path(rec_scene).stem().string() : rec_id, run.detections);
      out["keypoints"] = run.features.indices.size();
      out["pipeline"] = provider ? "boost" : "lp";
      out["time"] = {{"saliency", run.stages.saliency}, {"detect", run.stages.detect},
                     {"describe", run.stages.describe}, {"match", run.stages.match},
                     {"group", run.stages.group},       {"pose", run.stages.pose},
                     {"total", run.total}};
      write_text(rec_out, out.dump(2) + "\n");
    } else if (*bench) {
      const BenchConfig cfg = bench_config.empty() ? BenchConfig{} : load_bench_config(bench_config);
      const auto report = run_benchmark(cfg, [&](const std::string& msg) {
        if (!bench_quiet) std::cerr << msg << '\n';
      });
      write_text(bench_csv, report_csv(report));
      if (!bench_json.empty()) write_text(bench_json, report_json(report));
    } else if (*eval) {
      if (eval_dataset.empty() == eval_models.empty())
        throw InvalidArgument("eval needs exactly one of --dataset or --models");
      const auto models = load_models(eval_dataset, eval_models);
      const auto gt = load_ground_truth(eval_gt);
      auto dets = json::parse(read_text(eval_dets));
      if (dets.is_object()) dets = json::array({dets});
      std::vector<SceneOutcome> scenes;
      for (const auto& s : dets) {
        SceneOutcome o;
        o.scene = s.at("scene").get<std::string>();
        for (const auto& d : s.at("detections"))
          o.detections.push_back(
              {d.at("model").get<int>(), d.value("view", 0), pose_from_json(d.at("pose")), d.at("support").get<std::size_t>()});
        for (const auto& e : gt)
          if (e.scene == o.scene) o.ground_truth.push_back(e);
        scenes.push_back(std::move(o));
      }
      const auto points = prc_sweep(scenes, models, eval_iou, eval_start);
      json prc = json::array();
      for (const auto& p : points)
        prc.push_back({{"threshold", p.threshold}, {"precision", p.precision}, {"recall", p.recall}, {"tp", p.tp},
                       {"fp", p.fp}, {"fn", p.fn}});
      write_text(eval_out, json{{"auc", auc(points)}, {"prc", prc}}.dump(2) + "\n");
    } else if (*sal) {
      const std::string ext = fs::path(sal_in).extension().string();
      SaliencyMask map;
      if (ext == ".pcd" || ext == ".ply") {
        const auto cloud = load_cloud(sal_in);
        if (!cloud.organized()) throw InvalidArgument("saliency needs an organized cloud");
        map = spectral_residual_saliency(rgb_image_of(cloud));
      } else {
        map = spectral_residual_saliency(load_image(sal_in));
      }
      if (sal_threshold > 0) save_mask(binarize(map, sal_threshold, sal_dilate), sal_out);
      else save_mask(map, sal_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
