#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "salboost/evaluation.hpp"
#include "salboost/pipeline.hpp"
#include "salboost/synthetic.hpp"

namespace salboost {

enum class MaskSource { Oracle, SpectralResidual };

struct BenchConfig {
  std::optional<std::string> dataset;  // suite directory; otherwise `synthetic` is generated
  SuiteSpec synthetic;
  std::vector<DetectorKind> detectors{DetectorKind::Uniform, DetectorKind::Iss, DetectorKind::Fast};
  std::vector<DescriptorFamily> descriptors{DescriptorFamily::Shot, DescriptorFamily::Cshot, DescriptorFamily::Fpfh,
                                            DescriptorFamily::Pfhrgb};
  bool run_lp = true;
  bool run_boost = true;
  MaskSource mask = MaskSource::Oracle;
  double saliency_threshold = 0.5;
  std::uint32_t saliency_dilate = 8;
  PipelineConfig pipeline;  // detector and descriptor are set per combination
  double iou_min = 0.25;
  bool warmup = true;
  std::optional<std::size_t> scene_limit;
};

/// Reads a JSON config; every key is optional. Throws ParseError on syntax
/// errors and InvalidArgument on unknown keys or bad values.
BenchConfig parse_bench_config(const std::string& json_text);
BenchConfig load_bench_config(const std::string& path);

struct PipelineSummary {
  bool ran = false;
  double mean_keypoints = 0.0;
  StageTimes mean_stages;
  double mean_total = 0.0;
  std::vector<PrcPoint> prc;
  double auc = 0.0;
  std::vector<SceneOutcome> scenes;
};

struct ComboReport {
  DetectorKind detector = DetectorKind::Uniform;
  DescriptorFamily descriptor = DescriptorFamily::Shot;
  std::size_t database_rows = 0;
  PipelineSummary lp;
  PipelineSummary boost;
};

struct EvalReport {
  std::size_t scenes = 0;
  double epsilon = 0.0;
  double iou_min = 0.0;
  std::string mask_source;
  std::vector<ComboReport> rows;
};

/// Signed relative change in percent, (boost - lp) / lp * 100; NaN when
/// lp is 0 or either side did not run.
double percent_change(double lp, double boost);

using ProgressFn = std::function<void(const std::string&)>;

/// Runs every detector/descriptor combination over the suite's scenes, one
/// scene at a time, for the plain and the boosted pipeline.
EvalReport run_benchmark(const SyntheticSuite& suite, const BenchConfig& config, const ProgressFn& progress = {});
/// Loads or generates the suite named by the config, then benchmarks it.
EvalReport run_benchmark(const BenchConfig& config, const ProgressFn& progress = {});

std::string report_csv(const EvalReport& report);
std::string report_json(const EvalReport& report);

}  // namespace salboost
