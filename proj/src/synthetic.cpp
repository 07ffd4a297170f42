#include "salboost/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <Eigen/Geometry>
#include <json.hpp>

#include "salboost/error.hpp"
#include "salboost/io.hpp"

namespace salboost {

namespace {

constexpr double kDeg = M_PI / 180.0;

struct Sampler {
  double spacing;
  std::vector<Point3> points;

  void add(const Vec3& p, const Vec3& n) { points.emplace_back(p, Rgb{}, n); }

  // Cell centers of the parallelogram origin + s*u + t*v, s,t in [0,1).
  void quad(const Vec3& origin, const Vec3& u, const Vec3& v, const Vec3& normal) {
    const int nu = std::max(1, static_cast<int>(std::ceil(u.norm() / spacing)));
    const int nv = std::max(1, static_cast<int>(std::ceil(v.norm() / spacing)));
    for (int i = 0; i < nu; ++i)
      for (int j = 0; j < nv; ++j) add(origin + (i + 0.5) / nu * u + (j + 0.5) / nv * v, normal);
  }

  void triangle(const Vec3& a, const Vec3& b, const Vec3& c) {
    const double edge = std::max({(b - a).norm(), (c - a).norm(), (c - b).norm()});
    const int n = std::max(1, static_cast<int>(std::ceil(edge / spacing)));
    const Vec3 normal = (b - a).cross(c - a).normalized();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n - i; ++j) add(a + (i + 1.0 / 3.0) / n * (b - a) + (j + 1.0 / 3.0) / n * (c - a), normal);
  }

  void disk(const Vec3& center, double r_in, double r_out, const Vec3& normal) {
    const int n = static_cast<int>(std::ceil(2 * r_out / spacing));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double x = -r_out + (i + 0.5) * 2 * r_out / n;
        const double y = -r_out + (j + 0.5) * 2 * r_out / n;
        const double r = std::hypot(x, y);
        if (r <= r_out && r >= r_in) add(center + Vec3(x, y, 0), normal);
      }
  }

  void cylinder_side(double radius, double z0, double z1) {
    const int na = static_cast<int>(std::ceil(2 * M_PI * radius / spacing));
    const int nz = std::max(1, static_cast<int>(std::ceil((z1 - z0) / spacing)));
    for (int i = 0; i < na; ++i) {
      const double a = (i + 0.5) * 2 * M_PI / na;
      const Vec3 n(std::cos(a), std::sin(a), 0);
      for (int j = 0; j < nz; ++j) add(Vec3(radius * n.x(), radius * n.y(), z0 + (j + 0.5) * (z1 - z0) / nz), n);
    }
  }

  void upper_hemisphere(const Vec3& center, double radius) {
    const int nl = static_cast<int>(std::ceil(M_PI_2 * radius / spacing));
    for (int k = 0; k < nl; ++k) {
      const double lat = (k + 0.5) * M_PI_2 / nl;
      const int na = std::max(1, static_cast<int>(std::ceil(2 * M_PI * radius * std::cos(lat) / spacing)));
      for (int i = 0; i < na; ++i) {
        const double a = (i + 0.5) * 2 * M_PI / na;
        const Vec3 n(std::cos(lat) * std::cos(a), std::cos(lat) * std::sin(a), std::sin(lat));
        add(center + radius * n, n);
      }
    }
  }
};

struct Box {
  Vec3 lo, hi;
};

bool inside(const Box& b, const Vec3& p, bool closed) {
  constexpr double e = 1e-9;
  for (int i = 0; i < 3; ++i) {
    if (closed ? (p[i] < b.lo[i] - e || p[i] > b.hi[i] + e) : (p[i] <= b.lo[i] + e || p[i] >= b.hi[i] - e))
      return false;
  }
  return true;
}

// Surface of a union of boxes: faces inside another box are dropped, and a
// face shared with an earlier box is kept only once.
void box_union(Sampler& s, const std::vector<Box>& boxes) {
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    const auto& b = boxes[k];
    Sampler local{s.spacing, {}};
    const Vec3 d = b.hi - b.lo;
    const Vec3 ex(d.x(), 0, 0), ey(0, d.y(), 0), ez(0, 0, d.z());
    local.quad(b.lo, ey, ez, -Vec3::UnitX());
    local.quad(b.lo + ex, ey, ez, Vec3::UnitX());
    local.quad(b.lo, ex, ez, -Vec3::UnitY());
    local.quad(b.lo + ey, ex, ez, Vec3::UnitY());
    local.quad(b.lo, ex, ey, -Vec3::UnitZ());
    local.quad(b.lo + ez, ex, ey, Vec3::UnitZ());
    for (const auto& p : local.points) {
      bool drop = false;
      for (std::size_t o = 0; o < boxes.size() && !drop; ++o) {
        if (o == k) continue;
        drop = inside(boxes[o], p.position, o < k);
      }
      if (!drop) s.points.push_back(p);
    }
  }
}

const std::array<std::array<Rgb, 2>, 5> kPalettes{{
    {{{200, 40, 40}, {240, 200, 60}}},
    {{{40, 90, 200}, {230, 230, 230}}},
    {{{40, 160, 70}, {120, 40, 140}}},
    {{{230, 120, 30}, {30, 30, 30}}},
    {{{150, 60, 30}, {90, 200, 220}}},
}};

}  // namespace

PointCloud make_model(ModelShape shape, double spacing) {
  if (!(spacing > 0)) throw InvalidArgument("model spacing must be positive");
  Sampler s{spacing, {}};
  switch (shape) {
    case ModelShape::LBlock:
      box_union(s, {{Vec3(0, 0, 0), Vec3(0.12, 0.05, 0.04)}, {Vec3(0, 0, 0), Vec3(0.04, 0.05, 0.12)}});
      break;
    case ModelShape::Cylinder:
      s.cylinder_side(0.04, 0.0, 0.12);
      s.disk(Vec3(0, 0, 0), 0.0, 0.04, -Vec3::UnitZ());
      s.disk(Vec3(0, 0, 0.12), 0.0, 0.04, Vec3::UnitZ());
      break;
    case ModelShape::Pyramid: {
      const double h = 0.06;
      const Vec3 a(-h, -h, 0), b(h, -h, 0), c(h, h, 0), d(-h, h, 0), apex(0, 0, 0.10);
      s.triangle(a, b, apex);
      s.triangle(b, c, apex);
      s.triangle(c, d, apex);
      s.triangle(d, a, apex);
      s.quad(a, d - a, b - a, -Vec3::UnitZ());
      break;
    }
    case ModelShape::TBlock:
      box_union(s, {{Vec3(-0.07, -0.025, 0.08), Vec3(0.07, 0.025, 0.12)},
                    {Vec3(-0.02, -0.025, 0.0), Vec3(0.02, 0.025, 0.12)}});
      break;
    case ModelShape::Mushroom:
      s.cylinder_side(0.02, 0.0, 0.06);
      s.disk(Vec3(0, 0, 0), 0.0, 0.02, -Vec3::UnitZ());
      s.disk(Vec3(0, 0, 0.06), 0.02, 0.05, -Vec3::UnitZ());
      s.upper_hemisphere(Vec3(0, 0, 0.06), 0.05);
      break;
  }

  const auto& palette = kPalettes[static_cast<std::size_t>(shape)];
  // Up (+z while building) becomes -y.
  const Mat3 up = Eigen::AngleAxisd(M_PI_2, Vec3::UnitX()).toRotationMatrix();
  std::vector<Vec3> rotated;
  rotated.reserve(s.points.size());
  for (auto& p : s.points) {
    const Vec3& q = p.position;
    const long parity = static_cast<long>(std::floor((q.x() + 0.005) / 0.02) + std::floor((q.y() + 0.005) / 0.02) +
                                          std::floor((q.z() + 0.005) / 0.02));
    p.rgb = palette[static_cast<std::size_t>(((parity % 2) + 2) % 2)];
    p.position = up * q;
    p.normal = up * p.normal;
    rotated.push_back(p.position);
  }
  const Aabb box = bounding_box(rotated);
  const Vec3 center = 0.5 * (box.min + box.max);
  for (auto& p : s.points) p.position -= center;
  return PointCloud::unorganized(std::move(s.points), true, true);
}

std::vector<PointCloud> standard_models(double spacing) {
  std::vector<PointCloud> out;
  for (auto shape : {ModelShape::LBlock, ModelShape::Cylinder, ModelShape::Pyramid, ModelShape::TBlock,
                     ModelShape::Mushroom})
    out.push_back(make_model(shape, spacing));
  return out;
}

namespace {

struct Projected {
  std::size_t pixel;
  double depth;
};

std::optional<Projected> project(const Vec3& p, const CameraIntrinsics& cam) {
  if (!(p.z() > 0)) return std::nullopt;
  const double u = cam.fx * p.x() / p.z() + cam.cx;
  const double v = cam.fy * p.y() / p.z() + cam.cy;
  const double col = std::round(u), row = std::round(v);
  if (col < 0 || row < 0 || col >= cam.width || row >= cam.height) return std::nullopt;
  return Projected{static_cast<std::size_t>(row) * cam.width + static_cast<std::size_t>(col), p.z()};
}

/// z-buffer over a stream of camera-frame points; owner is caller-defined.
struct DepthBuffer {
  std::vector<double> depth;
  std::vector<Point3> point;
  std::vector<int> owner;

  explicit DepthBuffer(const CameraIntrinsics& cam)
      : depth(static_cast<std::size_t>(cam.width) * cam.height, std::numeric_limits<double>::infinity()),
        point(depth.size()),
        owner(depth.size(), -1) {}

  void splat(const Projected& pr, const Point3& p, int who) {
    if (pr.depth < depth[pr.pixel]) {
      depth[pr.pixel] = pr.depth;
      point[pr.pixel] = Point3(p.position, p.rgb);
      owner[pr.pixel] = who;
    }
  }
};

bool facing_away(const Point3& p) { return p.has_normal() && p.normal.dot(p.position) > 0; }

void check_camera(const CameraIntrinsics& cam) {
  if (cam.width == 0 || cam.height == 0 || !(cam.fx > 0) || !(cam.fy > 0))
    throw InvalidArgument("camera needs a positive size and focal length");
}

}  // namespace

PointCloud render_view(const PointCloud& model, const RigidTransform& pose, const CameraIntrinsics& camera) {
  check_camera(camera);
  DepthBuffer buffer(camera);
  for (const auto& p : model.points()) {
    if (!p.valid()) continue;
    Point3 q(pose.apply(p.position), p.rgb, p.has_normal() ? pose.apply_direction(p.normal) : Vec3::Constant(kNaN));
    if (facing_away(q)) continue;
    if (auto pr = project(q.position, camera)) buffer.splat(*pr, q, 0);
  }
  return PointCloud(std::move(buffer.point), camera.width, camera.height, model.has_rgb(), false);
}

SyntheticScene generate_synthetic_scene(std::span<const PointCloud> models, std::span<const Placement> placements,
                                        const ClutterSpec& clutter, double noise_sigma, std::uint64_t seed,
                                        const CameraIntrinsics& camera, const std::string& id,
                                        std::uint32_t mask_dilate) {
  check_camera(camera);
  if (noise_sigma < 0) throw InvalidArgument("noise sigma must be non-negative");
  std::vector<std::vector<Point3>> placed(placements.size());
  std::vector<Aabb> boxes;
  for (std::size_t i = 0; i < placements.size(); ++i) {
    const auto& pl = placements[i];
    if (pl.model < 0 || static_cast<std::size_t>(pl.model) >= models.size())
      throw InvalidArgument("placement refers to unknown model " + std::to_string(pl.model));
    std::vector<Vec3> positions;
    for (const auto& p : models[static_cast<std::size_t>(pl.model)].points()) {
      if (!p.valid()) continue;
      Point3 q(pl.pose.apply(p.position), p.rgb,
               p.has_normal() ? pl.pose.apply_direction(p.normal) : Vec3::Constant(kNaN));
      if (!project(q.position, camera))
        throw InvalidArgument("model " + std::to_string(pl.model) + " extends outside the camera frustum");
      positions.push_back(q.position);
      placed[i].push_back(q);
    }
    boxes.push_back(bounding_box(positions));
    for (std::size_t j = 0; j < i; ++j)
      if (boxes[j].overlaps(boxes[i]))
        throw InvalidArgument("placements " + std::to_string(j) + " and " + std::to_string(i) + " overlap");
  }

  DepthBuffer buffer(camera);
  for (std::size_t i = 0; i < placed.size(); ++i)
    for (const auto& q : placed[i])
      if (!facing_away(q)) buffer.splat(*project(q.position, camera), q, static_cast<int>(i));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(clutter.box.min.x(), clutter.box.max.x());
  std::uniform_real_distribution<double> uy(clutter.box.min.y(), clutter.box.max.y());
  std::uniform_real_distribution<double> uz(clutter.box.min.z(), clutter.box.max.z());
  std::uniform_int_distribution<int> uc(0, 255);
  for (std::size_t k = 0; k < clutter.count; ++k) {
    const double x = ux(rng), y = uy(rng), z = uz(rng);
    const Rgb c{static_cast<std::uint8_t>(uc(rng)), static_cast<std::uint8_t>(uc(rng)),
                static_cast<std::uint8_t>(uc(rng))};
    const Point3 p(Vec3(x, y, z), c);
    if (auto pr = project(p.position, camera)) buffer.splat(*pr, p, -1);
  }

  BinaryMask covered(camera.width, camera.height, 0);
  std::normal_distribution<double> noise(0.0, noise_sigma > 0 ? noise_sigma : 1.0);
  for (std::size_t px = 0; px < buffer.point.size(); ++px) {
    if (buffer.owner[px] >= 0) covered.data[px] = 1;
    if (noise_sigma > 0 && buffer.point[px].valid())
      buffer.point[px].position += Vec3(noise(rng), noise(rng), noise(rng));
  }

  SyntheticScene out;
  out.id = id;
  out.cloud = PointCloud(std::move(buffer.point), camera.width, camera.height, true, false);
  for (const auto& pl : placements) out.ground_truth.push_back({id, pl.model, pl.pose});
  out.oracle_mask = dilate(covered, mask_dilate);
  return out;
}

std::vector<GroundTruthEntry> SyntheticSuite::ground_truth() const {
  std::vector<GroundTruthEntry> out;
  for (const auto& s : scenes) out.insert(out.end(), s.ground_truth.begin(), s.ground_truth.end());
  return out;
}

namespace {

Mat3 pose_rotation(double yaw_deg, double tilt_deg) {
  // Yaw about the model's up axis (-y), then tilt the top toward the camera.
  return (Eigen::AngleAxisd(tilt_deg * kDeg, Vec3::UnitX()) * Eigen::AngleAxisd(yaw_deg * kDeg, -Vec3::UnitY()))
      .toRotationMatrix();
}

}  // namespace

RigidTransform view_pose(std::size_t index, std::size_t count, double distance, double tilt_deg) {
  if (count == 0) throw InvalidArgument("view count must be positive");
  const double yaw = 360.0 * static_cast<double>(index) / static_cast<double>(count);
  return RigidTransform{pose_rotation(yaw, tilt_deg), Vec3(0, 0, distance)};
}

std::vector<RenderedView> render_views(std::span<const PointCloud> models, std::size_t per_model,
                                       const CameraIntrinsics& camera, double distance, double tilt_deg) {
  std::vector<RenderedView> out;
  for (std::size_t m = 0; m < models.size(); ++m)
    for (std::size_t v = 0; v < per_model; ++v) {
      const auto pose = view_pose(v, per_model, distance, tilt_deg);
      out.push_back({static_cast<int>(m), static_cast<int>(v), render_view(models[m], pose, camera), pose.inverse()});
    }
  return out;
}

SyntheticSuite generate_suite(const SuiteSpec& spec) {
  if (spec.min_objects == 0 || spec.min_objects > spec.max_objects || spec.max_objects > 5)
    throw InvalidArgument("object count range must lie within 1..5");
  if (spec.views_per_model == 0) throw InvalidArgument("need at least one view per model");
  SyntheticSuite suite;
  suite.camera = spec.camera;
  suite.models = standard_models(spec.model_spacing);
  suite.views = render_views(suite.models, spec.views_per_model, spec.camera, spec.view_distance, spec.view_tilt_deg);

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::size_t s = 0; s < spec.scenes; ++s) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%03zu", s);
    std::uniform_int_distribution<std::size_t> count_dist(spec.min_objects, spec.max_objects);
    const std::size_t count = count_dist(rng);
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) throw InvalidArgument("could not place objects without overlap");
      std::vector<int> ids{0, 1, 2, 3, 4};
      std::shuffle(ids.begin(), ids.end(), rng);
      std::vector<Placement> placements;
      for (std::size_t k = 0; k < count; ++k) {
        std::uniform_int_distribution<std::size_t> view_dist(0, spec.views_per_model - 1);
        const double yaw = 360.0 * static_cast<double>(view_dist(rng)) / static_cast<double>(spec.views_per_model) +
                           spec.yaw_jitter_deg * unit(rng);
        const double tilt = spec.view_tilt_deg + spec.tilt_jitter_deg * unit(rng);
        const Vec3 t(0.2 * unit(rng), 0.11 * unit(rng), spec.view_distance + 0.05 * unit(rng));
        placements.push_back({ids[k], RigidTransform{pose_rotation(yaw, tilt), t}});
      }
      try {
        suite.scenes.push_back(generate_synthetic_scene(suite.models, placements, spec.clutter, spec.noise_sigma,
                                                        rng(), spec.camera, name, spec.mask_dilate));
        break;
      } catch (const InvalidArgument&) {
        continue;
      }
    }
  }
  return suite;
}

namespace {

nlohmann::json flat_matrix(const RigidTransform& t) {
  const Mat4 m = t.matrix();
  auto out = nlohmann::json::array();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out.push_back(m(r, c));
  return out;
}

RigidTransform parse_matrix(const nlohmann::json& j) {
  const auto flat = j.get<std::vector<double>>();
  if (flat.size() != 16) throw InvalidArgument("transform needs 16 numbers");
  return RigidTransform::from_matrix(Eigen::Map<const Eigen::Matrix<double, 4, 4, Eigen::RowMajor>>(flat.data()));
}

}  // namespace

void save_suite(const SyntheticSuite& suite, const std::string& directory) {
  namespace fs = std::filesystem;
  const fs::path root(directory);
  for (const char* sub : {"models", "views", "scenes", "masks"}) fs::create_directories(root / sub);
  nlohmann::json manifest;
  manifest["camera"] = {{"width", suite.camera.width}, {"height", suite.camera.height}, {"fx", suite.camera.fx},
                        {"fy", suite.camera.fy},       {"cx", suite.camera.cx},         {"cy", suite.camera.cy}};
  manifest["models"] = nlohmann::json::array();
  for (std::size_t m = 0; m < suite.models.size(); ++m) {
    const std::string rel = "models/model_" + std::to_string(m) + ".pcd";
    save_cloud(suite.models[m], (root / rel).string(), CloudFormat::PcdBinary);
    manifest["models"].push_back({{"id", m}, {"cloud", rel}});
  }
  manifest["views"] = nlohmann::json::array();
  for (const auto& v : suite.views) {
    const std::string rel = "views/m" + std::to_string(v.model) + "_v" + std::to_string(v.view) + ".pcd";
    save_cloud(v.cloud, (root / rel).string(), CloudFormat::PcdBinary);
    manifest["views"].push_back(
        {{"model", v.model}, {"view", v.view}, {"cloud", rel}, {"view_to_model", flat_matrix(v.view_to_model)}});
  }
  manifest["scenes"] = nlohmann::json::array();
  for (const auto& s : suite.scenes) {
    const std::string cloud_rel = "scenes/" + s.id + ".pcd";
    const std::string mask_rel = "masks/" + s.id + ".pgm";
    save_cloud(s.cloud, (root / cloud_rel).string(), CloudFormat::PcdBinary);
    save_mask(s.oracle_mask, (root / mask_rel).string());
    manifest["scenes"].push_back({{"id", s.id}, {"cloud", cloud_rel}, {"mask", mask_rel}});
  }
  manifest["ground_truth"] = "gt.txt";
  save_ground_truth(suite.ground_truth(), (root / "gt.txt").string());
  std::ofstream out(root / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + directory);
  out << manifest.dump(2) << '\n';
}

SyntheticSuite load_suite(const std::string& directory) {
  namespace fs = std::filesystem;
  const fs::path root(directory);
  const std::string manifest_path = (root / "manifest.json").string();
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open " + manifest_path);
  SyntheticSuite suite;
  try {
    const auto manifest = nlohmann::json::parse(in);
    const auto& cam = manifest.at("camera");
    suite.camera = {cam.at("width").get<std::uint32_t>(), cam.at("height").get<std::uint32_t>(),
                    cam.at("fx").get<double>(),           cam.at("fy").get<double>(),
                    cam.at("cx").get<double>(),           cam.at("cy").get<double>()};
    for (const auto& m : manifest.at("models")) {
      if (m.at("id").get<std::size_t>() != suite.models.size())
        throw InvalidArgument("model ids must be 0, 1, 2, ... in order");
      suite.models.push_back(load_cloud((root / m.at("cloud").get<std::string>()).string()));
    }
    for (const auto& v : manifest.at("views"))
      suite.views.push_back({v.at("model").get<int>(), v.at("view").get<int>(),
                             load_cloud((root / v.at("cloud").get<std::string>()).string()),
                             parse_matrix(v.at("view_to_model"))});
    const auto gt = load_ground_truth((root / manifest.at("ground_truth").get<std::string>()).string());
    for (const auto& s : manifest.at("scenes")) {
      SyntheticScene scene;
      scene.id = s.at("id").get<std::string>();
      scene.cloud = load_cloud((root / s.at("cloud").get<std::string>()).string());
      const auto mask = load_mask((root / s.at("mask").get<std::string>()).string(),
                                  ImageSize{scene.cloud.width(), scene.cloud.height()});
      scene.oracle_mask = binarize(mask, 0.5, 0);
      for (const auto& e : gt)
        if (e.scene == scene.id) scene.ground_truth.push_back(e);
      suite.scenes.push_back(std::move(scene));
    }
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError::at_byte(manifest_path, e.byte, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path + ": " + e.what());
  }
  return suite;
}

}  // namespace salboost
