#include "salboost/recognition.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include <Eigen/LU>
#include <Eigen/SVD>
#include <json.hpp>

#include "salboost/error.hpp"
#include "salboost/geometry.hpp"
#include "salboost/io.hpp"

namespace salboost {

static_assert(std::endian::native == std::endian::little, "descriptor files are little-endian");

std::vector<int> ModelDatabase::model_ids() const {
  std::set<int> ids;
  for (const auto& v : views_) ids.insert(v.model);
  return {ids.begin(), ids.end()};
}

const ModelView& ModelDatabase::view(int model, int view) const {
  auto it = lookup_.find({model, view});
  if (it == lookup_.end())
    throw InvalidArgument("no view " + std::to_string(view) + " of model " + std::to_string(model));
  return views_[it->second];
}

ModelDatabase build_database(std::vector<ModelView> views, std::optional<DescriptorFamily> family) {
  if (views.empty()) throw InvalidArgument("database needs at least one view");
  ModelDatabase db;
  bool have_family = family.has_value();
  if (family) db.family_ = *family;
  std::vector<DescriptorIndex::Row> rows;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& v = views[i];
    if (v.keypoints.size() != v.descriptors.size())
      throw InvalidArgument("view keypoint and descriptor counts differ");
    if (!db.lookup_.emplace(std::pair{v.model, v.view}, i).second)
      throw InvalidArgument("duplicate view " + std::to_string(v.view) + " of model " + std::to_string(v.model));
    for (std::size_t k = 0; k < v.descriptors.size(); ++k) {
      const auto& d = v.descriptors[k];
      if (!have_family) {
        db.family_ = d.family;
        have_family = true;
      } else if (d.family != db.family_) {
        throw InvalidArgument("database mixes descriptor families");
      }
      rows.push_back({{v.model, v.view, k}, d.values});
    }
  }
  if (!have_family) throw InvalidArgument("database views carry no descriptors");
  db.views_ = std::move(views);
  db.index_ = DescriptorIndex(descriptor_length(db.family_), std::move(rows));
  return db;
}

std::vector<Correspondence> match_scene(std::span<const Descriptor> scene, std::span<const Vec3> scene_positions,
                                        const ModelDatabase& db) {
  if (scene.size() != scene_positions.size())
    throw InvalidArgument("scene descriptor and position counts differ");
  const std::size_t dim = descriptor_length(db.family());
  std::vector<double> block;
  block.reserve(scene.size() * dim);
  for (const auto& d : scene) {
    if (d.family != db.family())
      throw InvalidArgument("scene descriptor family " + std::string(to_string(d.family)) +
                            " does not match database family " + std::string(to_string(db.family())));
    if (d.values.size() != dim) throw InvalidArgument("scene descriptor has the wrong length");
    block.insert(block.end(), d.values.begin(), d.values.end());
  }
  const auto matches = db.index().nearest_batch(block);
  std::vector<Correspondence> out;
  out.reserve(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const auto& m = matches[i];
    const auto& view = db.view(m.provenance.model, m.provenance.view);
    out.push_back({i, scene_positions[i], m.provenance.model, m.provenance.view, m.provenance.keypoint,
                   view.keypoints[m.provenance.keypoint], m.distance});
  }
  return out;
}

bool consistent(const Correspondence& a, const Correspondence& b, double epsilon) {
  const double ds = (a.scene_position - b.scene_position).norm();
  const double dm = (a.model_position - b.model_position).norm();
  return std::abs(ds - dm) <= epsilon;
}

std::vector<Cluster> geometric_consistency_group(std::span<const Correspondence> correspondences, double epsilon,
                                                 std::size_t min_size) {
  if (!(epsilon > 0)) throw InvalidArgument("grouping tolerance must be positive");
  std::vector<std::uint8_t> taken(correspondences.size(), 0);
  std::vector<Cluster> out;
  for (std::size_t seed = 0; seed < correspondences.size(); ++seed) {
    if (taken[seed]) continue;
    taken[seed] = 1;
    Cluster c{correspondences[seed].model, correspondences[seed].view, {correspondences[seed]}, seed};
    for (std::size_t j = seed + 1; j < correspondences.size(); ++j) {
      if (taken[j]) continue;
      const bool fits = std::all_of(c.members.begin(), c.members.end(), [&](const Correspondence& m) {
        return consistent(m, correspondences[j], epsilon);
      });
      if (fits) {
        c.members.push_back(correspondences[j]);
        taken[j] = 1;
      }
    }
    if (c.size() >= std::max<std::size_t>(min_size, 1)) out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), [](const Cluster& a, const Cluster& b) { return a.size() > b.size(); });
  return out;
}

namespace {

void require_spread(std::span<const Vec3> pts, const Vec3& mean, const char* side) {
  Mat3 scatter = Mat3::Zero();
  for (const auto& p : pts) scatter += (p - mean) * (p - mean).transpose();
  const auto eig = eigen_symmetric(scatter);
  const double largest = eig.values[2];
  if (!(largest > 1e-20) || !(eig.values[1] > 1e-10 * largest))
    throw DegenerateGeometry(std::string(side) + " points are coincident or collinear");
}

bool lex_less(const Vec3& a, const Vec3& b) {
  return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
}

}  // namespace

RigidTransform estimate_pose(std::span<const Vec3> model, std::span<const Vec3> scene) {
  if (model.size() != scene.size()) throw InvalidArgument("pose needs paired points");
  if (model.size() < 3) throw DegenerateGeometry("pose needs at least 3 correspondences");

  // Canonical order so the sums do not depend on how members were listed.
  std::vector<std::size_t> order(model.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (model[a] != model[b]) return lex_less(model[a], model[b]);
    return lex_less(scene[a], scene[b]);
  });
  std::vector<Vec3> m, s;
  m.reserve(order.size());
  s.reserve(order.size());
  for (auto i : order) {
    m.push_back(model[i]);
    s.push_back(scene[i]);
  }

  Vec3 mc = Vec3::Zero(), sc = Vec3::Zero();
  for (std::size_t i = 0; i < m.size(); ++i) {
    mc += m[i];
    sc += s[i];
  }
  mc /= static_cast<double>(m.size());
  sc /= static_cast<double>(s.size());
  require_spread(m, mc, "model");
  require_spread(s, sc, "scene");

  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < m.size(); ++i) h += (m[i] - mc) * (s[i] - sc).transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0 ? -1.0 : 1.0;
  RigidTransform t;
  t.rotation = v * d * u.transpose();
  t.translation = sc - t.rotation * mc;
  return t;
}

RigidTransform estimate_pose(const Cluster& cluster) {
  std::vector<Vec3> m, s;
  for (const auto& c : cluster.members) {
    m.push_back(c.model_position);
    s.push_back(c.scene_position);
  }
  return estimate_pose(m, s);
}

ClusterCandidates group_correspondences(std::span<const Correspondence> correspondences, const ModelDatabase& db,
                                        const RecognitionParams& params) {
  std::map<std::pair<int, int>, std::vector<Correspondence>> per_view;
  for (const auto& c : correspondences) per_view[{c.model, c.view}].push_back(c);

  ClusterCandidates out;
  for (int id : db.model_ids()) out[id];
  for (auto& [key, list] : per_view) {
    auto clusters = geometric_consistency_group(list, params.epsilon, params.min_size);
    auto& dest = out[key.first];
    for (auto& c : clusters) dest.push_back(std::move(c));
  }
  for (auto& [id, list] : out) {
    // Views were visited in ascending id, so ties keep the lower view first.
    std::stable_sort(list.begin(), list.end(), [](const Cluster& a, const Cluster& b) { return a.size() > b.size(); });
  }
  std::erase_if(out, [](const auto& kv) { return kv.second.empty(); });
  return out;
}

std::vector<Detection> estimate_detections(const ClusterCandidates& candidates, const ModelDatabase& db) {
  std::vector<Detection> out;
  for (const auto& [id, clusters] : candidates) {
    for (const auto& c : clusters) {
      RigidTransform est;
      try {
        est = estimate_pose(c);
      } catch (const DegenerateGeometry&) {
        continue;
      }
      const auto& view = db.view(c.model, c.view);
      out.push_back({c.model, c.view, est * view.view_to_model.inverse(), c.size()});
      break;
    }
  }
  return out;
}

std::vector<Detection> recognize(std::span<const Descriptor> scene, std::span<const Vec3> scene_positions,
                                 const ModelDatabase& db, const RecognitionParams& params) {
  const auto matches = match_scene(scene, scene_positions, db);
  return estimate_detections(group_correspondences(matches, db, params), db);
}

namespace {

constexpr char kDescMagic[8] = {'S', 'B', 'D', 'E', 'S', 'C', '0', '1'};

std::string view_stem(const ModelView& v) {
  return "m" + std::to_string(v.model) + "_v" + std::to_string(v.view);
}

void write_descriptors(const std::string& path, DescriptorFamily family, std::span<const Descriptor> descs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  const auto fam = static_cast<std::uint32_t>(family);
  const auto dims = static_cast<std::uint32_t>(descriptor_length(family));
  const auto count = static_cast<std::uint64_t>(descs.size());
  out.write(kDescMagic, 8);
  out.write(reinterpret_cast<const char*>(&fam), 4);
  out.write(reinterpret_cast<const char*>(&dims), 4);
  out.write(reinterpret_cast<const char*>(&count), 8);
  for (const auto& d : descs) out.write(reinterpret_cast<const char*>(d.values.data()), static_cast<std::streamsize>(dims * 8));
  if (!out) throw IoError("write failed for " + path);
}

std::vector<Descriptor> read_descriptors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 24 || std::memcmp(bytes.data(), kDescMagic, 8) != 0)
    throw ParseError::at_byte(path, 0, "not a descriptor file");
  std::uint32_t fam = 0, dims = 0;
  std::uint64_t count = 0;
  std::memcpy(&fam, bytes.data() + 8, 4);
  std::memcpy(&dims, bytes.data() + 12, 4);
  std::memcpy(&count, bytes.data() + 16, 8);
  if (fam > static_cast<std::uint32_t>(DescriptorFamily::Pfhrgb))
    throw ParseError::at_byte(path, 8, "unknown descriptor family " + std::to_string(fam));
  const auto family = static_cast<DescriptorFamily>(fam);
  if (dims != descriptor_length(family))
    throw ParseError::at_byte(path, 12, "dimension " + std::to_string(dims) + " does not fit the family");
  const std::size_t expected = 24 + count * dims * 8;
  if (bytes.size() != expected)
    throw ParseError::at_byte(path, std::min(bytes.size(), expected), "payload size does not match the header");
  std::vector<Descriptor> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i].family = family;
    out[i].keypoint = i;
    out[i].values.resize(dims);
    std::memcpy(out[i].values.data(), bytes.data() + 24 + i * dims * 8, dims * 8);
  }
  return out;
}

}  // namespace

void save_database(const ModelDatabase& db, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(directory) / "views");
  nlohmann::json manifest;
  manifest["family"] = std::string(to_string(db.family()));
  manifest["dimension"] = descriptor_length(db.family());
  manifest["views"] = nlohmann::json::array();
  for (const auto& v : db.views()) {
    const std::string stem = view_stem(v);
    std::vector<Point3> pts;
    pts.reserve(v.keypoints.size());
    for (const auto& k : v.keypoints) pts.emplace_back(k);
    save_cloud(PointCloud::unorganized(std::move(pts)), (fs::path(directory) / "views" / (stem + ".pcd")).string(),
               CloudFormat::PcdBinary);
    write_descriptors((fs::path(directory) / "views" / (stem + ".desc")).string(), db.family(), v.descriptors);
    const Mat4 m = v.view_to_model.matrix();
    std::vector<double> flat;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) flat.push_back(m(r, c));
    manifest["views"].push_back({{"model", v.model},
                                 {"view", v.view},
                                 {"keypoints", "views/" + stem + ".pcd"},
                                 {"descriptors", "views/" + stem + ".desc"},
                                 {"view_to_model", flat}});
  }
  std::ofstream out(fs::path(directory) / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + directory);
  out << manifest.dump(2) << '\n';
}

ModelDatabase load_database(const std::string& directory) {
  namespace fs = std::filesystem;
  const auto manifest_path = (fs::path(directory) / "manifest.json").string();
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open " + manifest_path);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError::at_byte(manifest_path, e.byte, e.what());
  }
  try {
    const auto family = parse_descriptor_family(manifest.at("family").get<std::string>());
    std::vector<ModelView> views;
    for (const auto& entry : manifest.at("views")) {
      ModelView v;
      v.model = entry.at("model").get<int>();
      v.view = entry.at("view").get<int>();
      const auto cloud = load_cloud((fs::path(directory) / entry.at("keypoints").get<std::string>()).string());
      for (const auto& p : cloud.points()) v.keypoints.push_back(p.position);
      v.descriptors = read_descriptors((fs::path(directory) / entry.at("descriptors").get<std::string>()).string());
      const auto flat = entry.at("view_to_model").get<std::vector<double>>();
      if (flat.size() != 16) throw ParseError(manifest_path + ": view_to_model needs 16 numbers");
      v.view_to_model = RigidTransform::from_matrix(Eigen::Map<const Eigen::Matrix<double, 4, 4, Eigen::RowMajor>>(flat.data()));
      for (const auto& d : v.descriptors)
        if (d.family != family) throw ParseError(manifest_path + ": descriptor file family differs from manifest");
      views.push_back(std::move(v));
    }
    return build_database(std::move(views), family);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path + ": " + e.what());
  }
}

}  // namespace salboost
