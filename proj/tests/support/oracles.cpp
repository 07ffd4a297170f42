#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include <Eigen/Geometry>

#include "salboost/geometry.hpp"

namespace sbtest {

using namespace salboost;

Mat3 random_rotation(Rng& rng) {
  std::normal_distribution<double> g;
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q.toRotationMatrix();
}

RigidTransform random_transform(Rng& rng, double translation_scale) {
  std::uniform_real_distribution<double> u(-translation_scale, translation_scale);
  return RigidTransform::from(random_rotation(rng), Vec3(u(rng), u(rng), u(rng)), 1e-9);
}

namespace {

double sq(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

void sort_neighbors(std::vector<Neighbor>& v) {
  std::sort(v.begin(), v.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.index < b.index;
  });
}

}  // namespace

std::vector<Neighbor> linear_knn(std::span<const Vec3> points, const Vec3& q, std::size_t k) {
  std::vector<Neighbor> all;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (points[i].allFinite()) all.push_back({i, std::sqrt(sq(points[i], q))});
  sort_neighbors(all);
  if (all.size() > k) all.resize(k);
  return all;
}

std::vector<Neighbor> linear_radius(std::span<const Vec3> points, const Vec3& q, double r) {
  std::vector<Neighbor> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].allFinite()) continue;
    const double d = std::sqrt(sq(points[i], q));
    if (d <= r) out.push_back({i, d});
  }
  sort_neighbors(out);
  return out;
}

BruteMatch brute_nearest(const DescriptorIndex& index, std::span<const double> query) {
  BruteMatch best{0, std::numeric_limits<double>::infinity()};
  double best_sq = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < index.rows(); ++r) {
    const auto row = index.row(r);
    double acc = 0.0;
    for (std::size_t d = 0; d < row.size(); ++d) acc += (row[d] - query[d]) * (row[d] - query[d]);
    if (acc < best_sq) {
      best_sq = acc;
      best = {r, std::sqrt(acc)};
    }
  }
  return best;
}

std::vector<std::vector<std::size_t>> exhaustive_groups(std::span<const Correspondence> c, double epsilon,
                                                        std::size_t min_size) {
  const std::size_t n = c.size();
  if (n > 20) throw std::invalid_argument("exhaustive grouping is limited to 20 correspondences");
  std::vector<std::uint32_t> adj(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double ds = (c[i].scene_position - c[j].scene_position).norm();
      const double dm = (c[i].model_position - c[j].model_position).norm();
      if (i != j && std::abs(ds - dm) <= epsilon) adj[i] |= 1u << j;
    }
  auto is_clique = [&](std::uint32_t mask) {
    for (std::size_t i = 0; i < n; ++i)
      if ((mask >> i & 1u) && (mask & ~adj[i] & ~(1u << i))) return false;
    return true;
  };
  // Lexicographic order on membership read from index 0 upward.
  auto lex_greater = [&](std::uint32_t a, std::uint32_t b) {
    for (std::size_t i = 0; i < n; ++i) {
      const bool ba = a >> i & 1u;
      const bool bb = b >> i & 1u;
      if (ba != bb) return ba;
    }
    return false;
  };

  std::uint32_t assigned = 0;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (assigned >> seed & 1u) continue;
    const std::uint32_t avail = ~assigned & ((n == 32 ? 0u : (1u << n)) - 1u) & ~(1u << seed);
    std::uint32_t best = 1u << seed;
    // Every subset of the available correspondences, joined with the seed.
    for (std::uint32_t sub = avail;; sub = (sub - 1) & avail) {
      const std::uint32_t mask = sub | (1u << seed);
      if (is_clique(mask) && lex_greater(mask, best)) best = mask;
      if (sub == 0) break;
    }
    assigned |= best;
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i)
      if (best >> i & 1u) members.push_back(i);
    if (members.size() >= std::max<std::size_t>(min_size, 1)) groups.push_back(std::move(members));
  }
  std::stable_sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return groups;
}

PointCloud bumpy_patch(Rng& rng, std::size_t n, double extent, double noise, bool with_normals, const Vec3& center) {
  std::uniform_real_distribution<double> u(-0.5 * extent, 0.5 * extent);
  std::normal_distribution<double> g(0.0, noise > 0 ? noise : 1.0);
  std::uniform_int_distribution<int> col(0, 255);
  std::vector<Point3> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = u(rng);
    const double y = u(rng);
    const double z = 0.01 * std::sin(60.0 * x) * std::cos(45.0 * y) + (noise > 0 ? g(rng) : 0.0);
    Point3 p(center + Vec3(x, y, z),
             Rgb{static_cast<std::uint8_t>(col(rng)), static_cast<std::uint8_t>(col(rng)),
                 static_cast<std::uint8_t>(col(rng))});
    if (with_normals) {
      const double fx = 0.6 * std::cos(60.0 * x) * std::cos(45.0 * y);
      const double fy = -0.45 * std::sin(60.0 * x) * std::sin(45.0 * y);
      Vec3 nrm = Vec3(-fx, -fy, 1.0).normalized();
      if (nrm.dot(-p.position) < 0) nrm = -nrm;
      p.normal = nrm;
    }
    pts.push_back(p);
  }
  return PointCloud::unorganized(std::move(pts), true, with_normals);
}

namespace {

struct NaivePair {
  double cos_alpha, cos_phi, theta;
  bool second_is_source;
};

// Source is the point whose normal is closer to parallel with the line
// joining the two points; the first point wins ties.
bool naive_pair(const Point3& a, const Point3& b, NaivePair& out) {
  const Vec3 line = b.position - a.position;
  const double d = line.norm();
  if (d == 0) return false;
  const Vec3 e = line / d;
  const bool second = std::abs(b.normal.dot(e)) > std::abs(a.normal.dot(e)) + salboost::kPairSourceTieTolerance;
  const Vec3& ns = second ? b.normal : a.normal;
  const Vec3& nt = second ? a.normal : b.normal;
  const Vec3 dir = second ? Vec3(-e) : e;
  const Vec3 u = ns;
  Vec3 v = u.cross(dir);
  if (v.norm() <= 1e-12) return false;
  v.normalize();
  const Vec3 w = u.cross(v);
  out.cos_alpha = std::min(1.0, std::max(-1.0, v.dot(nt)));
  out.cos_phi = std::min(1.0, std::max(-1.0, u.dot(dir)));
  out.theta = std::atan2(w.dot(nt), u.dot(nt));
  if (out.theta <= -M_PI) out.theta = M_PI;
  out.second_is_source = second;
  return true;
}

int cos_bin(double c, int bins) {
  const int b = static_cast<int>(std::floor((c + 1.0) / 2.0 * bins));
  return b < 0 ? 0 : (b >= bins ? bins - 1 : b);
}

int theta_bin(double t, int bins) {
  const int b = static_cast<int>(std::floor((t + M_PI) / (2.0 * M_PI) * bins));
  return b < 0 ? 0 : (b >= bins ? bins - 1 : b);
}

std::vector<std::size_t> ball(const PointCloud& cloud, std::size_t center, double radius) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!cloud[i].valid() || !cloud[i].has_normal()) continue;
    const double d = std::sqrt(sq(cloud[i].position, cloud[center].position));
    if (d > 0 && d <= radius) out.push_back(i);
  }
  return out;
}

std::vector<double> naive_spfh(const PointCloud& cloud, std::size_t p, double radius) {
  std::vector<double> h(33, 0.0);
  for (std::size_t q : ball(cloud, p, radius)) {
    NaivePair f;
    if (!naive_pair(cloud[p], cloud[q], f)) continue;
    h[cos_bin(f.cos_alpha, 11)] += 1;
    h[11 + cos_bin(f.cos_phi, 11)] += 1;
    h[22 + theta_bin(f.theta, 11)] += 1;
  }
  return h;
}

void to_percent(std::vector<double>& h, std::size_t block) {
  for (std::size_t s = 0; s < h.size(); s += block) {
    double total = 0;
    for (std::size_t i = s; i < s + block; ++i) total += h[i];
    if (total > 0)
      for (std::size_t i = s; i < s + block; ++i) h[i] = h[i] * 100.0 / total;
  }
}

}  // namespace

std::vector<double> naive_fpfh(const PointCloud& cloud, std::size_t keypoint, double radius) {
  const auto nn = ball(cloud, keypoint, radius);
  std::vector<double> out = naive_spfh(cloud, keypoint, radius);
  if (nn.empty()) return std::vector<double>(33, 0.0);
  for (std::size_t q : nn) {
    const double d = std::sqrt(sq(cloud[q].position, cloud[keypoint].position));
    const auto other = naive_spfh(cloud, q, radius);
    for (std::size_t b = 0; b < 33; ++b) out[b] += other[b] / d / static_cast<double>(nn.size());
  }
  to_percent(out, 11);
  return out;
}

std::vector<double> naive_pfhrgb(const PointCloud& cloud, std::size_t keypoint, double radius) {
  auto support = ball(cloud, keypoint, radius);
  support.push_back(keypoint);
  std::sort(support.begin(), support.end());
  auto ratio_bin = [](std::uint8_t s, std::uint8_t t) {
    // r/(1+r) = cs/(cs+ct); the largest k with k/5 <= that fraction, by exact comparison.
    const int cs = std::max<int>(s, 1), ct = std::max<int>(t, 1);
    int k = 0;
    while (k < 4 && 5 * cs >= (k + 1) * (cs + ct)) ++k;
    return k;
  };
  std::vector<double> h(250, 0.0);
  for (std::size_t i = 0; i < support.size(); ++i)
    for (std::size_t j = i + 1; j < support.size(); ++j) {
      const Point3& a = cloud[support[i]];
      const Point3& b = cloud[support[j]];
      NaivePair f;
      if (!naive_pair(a, b, f)) continue;
      h[cos_bin(f.cos_alpha, 5) * 25 + cos_bin(f.cos_phi, 5) * 5 + theta_bin(f.theta, 5)] += 1;
      const Rgb& s = f.second_is_source ? b.rgb : a.rgb;
      const Rgb& t = f.second_is_source ? a.rgb : b.rgb;
      h[125 + ratio_bin(s.r, t.r) * 25 + ratio_bin(s.g, t.g) * 5 + ratio_bin(s.b, t.b)] += 1;
    }
  to_percent(h, 125);
  return h;
}

double rigid_invariance_deviation(DescriptorFamily family, Rng& rng, std::size_t keypoints,
                                  std::size_t transforms, double radius) {
  const auto cloud = bumpy_patch(rng, 1200, 0.12, 0.0003, false);
  std::vector<std::size_t> kps(cloud.size());
  for (std::size_t i = 0; i < kps.size(); ++i) kps[i] = i;
  std::shuffle(kps.begin(), kps.end(), rng);
  kps.resize(keypoints);

  auto describe = [&](const PointCloud& c, const Vec3& viewpoint) {
    const KdTree3 tree(c);
    const auto with_normals = estimate_normals(c, tree, 10, viewpoint);
    return compute_descriptors(family, with_normals, tree, kps, radius);
  };
  const auto base = describe(cloud, Vec3::Zero());
  double worst = 0.0;
  for (std::size_t t = 0; t < transforms; ++t) {
    const auto motion = random_transform(rng, 1.0);
    const auto moved = describe(transform_cloud(cloud, motion), motion.apply(Vec3::Zero()));
    for (std::size_t k = 0; k < kps.size(); ++k)
      for (std::size_t i = 0; i < base[k].values.size(); ++i)
        worst = std::max(worst, std::abs(base[k].values[i] - moved[k].values[i]));
  }
  return worst;
}

double riemann_auc(std::span<const PrcPoint> points, std::size_t steps) {
  std::vector<std::pair<double, double>> curve;
  for (const auto& p : points) curve.emplace_back(p.recall, p.precision);
  std::sort(curve.begin(), curve.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto& [r, p] : curve) {
    if (!merged.empty() && merged.back().first == r)
      merged.back().second = std::max(merged.back().second, p);
    else
      merged.emplace_back(r, p);
  }
  if (merged.front().first > 0) merged.insert(merged.begin(), {0.0, merged.front().second});
  const double end = merged.back().first;
  if (end <= 0) return 0.0;
  const double h = end / static_cast<double>(steps);
  double area = 0.0;
  std::size_t seg = 0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double x = (static_cast<double>(i) + 0.5) * h;
    while (seg + 2 < merged.size() && merged[seg + 1].first < x) ++seg;
    const auto [x0, y0] = merged[seg];
    const auto [x1, y1] = merged[seg + 1];
    area += (y0 + (y1 - y0) * (x - x0) / (x1 - x0)) * h;
  }
  return area;
}

}  // namespace sbtest
