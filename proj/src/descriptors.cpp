#include "salboost/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "salboost/error.hpp"

namespace salboost {

std::size_t descriptor_length(DescriptorFamily family) {
  switch (family) {
    case DescriptorFamily::Shot: return kShotVolumes * kShotCosineBins;
    case DescriptorFamily::Cshot: return kShotVolumes * (kShotCosineBins + kShotColorBins);
    case DescriptorFamily::Fpfh: return 33;
    case DescriptorFamily::Pfhrgb: return 250;
  }
  return 0;
}

std::string_view to_string(DescriptorFamily family) {
  switch (family) {
    case DescriptorFamily::Shot: return "shot";
    case DescriptorFamily::Cshot: return "cshot";
    case DescriptorFamily::Fpfh: return "fpfh";
    case DescriptorFamily::Pfhrgb: return "pfhrgb";
  }
  return "?";
}

DescriptorFamily parse_descriptor_family(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "shot") return DescriptorFamily::Shot;
  if (lower == "cshot") return DescriptorFamily::Cshot;
  if (lower == "fpfh") return DescriptorFamily::Fpfh;
  if (lower == "pfhrgb") return DescriptorFamily::Pfhrgb;
  throw InvalidArgument("unknown descriptor family '" + std::string(name) + "'");
}

bool needs_rgb(DescriptorFamily family) {
  return family == DescriptorFamily::Cshot || family == DescriptorFamily::Pfhrgb;
}

Vec3 rgb_to_lab(Rgb c) {
  auto linear = [](std::uint8_t v) {
    const double s = v / 255.0;
    return s <= 0.04045 ? s / 12.92 : std::pow((s + 0.055) / 1.055, 2.4);
  };
  const double r = linear(c.r), g = linear(c.g), b = linear(c.b);
  // sRGB -> XYZ (D65), normalized by the reference white.
  const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
  const double y = (0.2126729 * r + 0.7151522 * g + 0.0721750 * b) / 1.00000;
  const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
  constexpr double kEps = 216.0 / 24389.0;
  constexpr double kKappa = 24389.0 / 27.0;
  auto f = [&](double t) { return t > kEps ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0; };
  const double fx = f(x), fy = f(y), fz = f(z);
  return Vec3(116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz));
}

namespace {

struct Interp {
  int bin[2];
  double weight[2];
};

/// Linear interpolation between bin centers; coordinate b is the center of
/// bin b. Mass beyond the outermost centers stays in the outermost bin.
Interp clamped(double v, int bins) {
  if (v <= 0.0) return {{0, 0}, {1.0, 0.0}};
  if (v >= bins - 1) return {{bins - 1, bins - 1}, {1.0, 0.0}};
  const int b = static_cast<int>(std::floor(v));
  const double f = v - b;
  return {{b, b + 1}, {1.0 - f, f}};
}

Interp circular(double v, int bins) {
  const int b = static_cast<int>(std::floor(v));
  const double f = v - b;
  const int b0 = ((b % bins) + bins) % bins;
  return {{b0, (b0 + 1) % bins}, {1.0 - f, f}};
}

void l2_normalize(std::vector<double>& v) {
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  if (n2 > 0) {
    const double inv = 1.0 / std::sqrt(n2);
    for (double& x : v) x *= inv;
  }
}

Descriptor shot_impl(const PointCloud& cloud, std::span<const Neighbor> neighbors, std::size_t keypoint,
                     const LocalReferenceFrame& lrf, double radius, bool color) {
  if (!(radius > 0)) throw InvalidArgument("descriptor radius must be positive");
  if (color && !cloud.has_rgb()) throw InvalidArgument("CSHOT needs a cloud with RGB");
  const auto family = color ? DescriptorFamily::Cshot : DescriptorFamily::Shot;
  Descriptor out{family, std::vector<double>(descriptor_length(family), 0.0), keypoint, false};

  const Point3& kp = cloud[keypoint];
  const Vec3 ref_normal = kp.has_normal() ? kp.normal : lrf.z;
  const Mat3 to_local = lrf.rotation();
  const Vec3 kp_lab = color ? rgb_to_lab(kp.rgb) : Vec3::Zero();
  const std::size_t color_offset = kShotVolumes * kShotCosineBins;
  constexpr int kAz = 8, kEl = 2, kRad = 2;

  std::size_t used = 0;
  for (const auto& nb : neighbors) {
    if (nb.distance > radius) continue;
    const Point3& q = cloud[nb.index];
    if (!q.has_normal()) continue;
    const Vec3 local = to_local * (q.position - kp.position);
    const double dist = local.norm();
    if (!(dist > 0)) continue;
    ++used;

    const double az = std::atan2(local.y(), local.x());
    const double el = std::asin(std::clamp(local.z() / dist, -1.0, 1.0));
    const Interp ia = circular((az + M_PI) / (2.0 * M_PI) * kAz - 0.5, kAz);
    const Interp ie = clamped((el + M_PI_2) / M_PI * kEl - 0.5, kEl);
    const Interp ir = clamped(dist / radius * kRad - 0.5, kRad);
    const double cosine = std::clamp(ref_normal.dot(q.normal), -1.0, 1.0);
    const Interp ic = clamped((cosine + 1.0) * 0.5 * kShotCosineBins - 0.5, static_cast<int>(kShotCosineBins));

    Interp il{};
    if (color) {
      const Vec3 d = (rgb_to_lab(q.rgb) - kp_lab).cwiseAbs();
      const double cd = std::min(1.0, (d.x() / 100.0 + d.y() / 255.0 + d.z() / 255.0) / 3.0);
      il = clamped(cd * kShotColorBins - 0.5, static_cast<int>(kShotColorBins));
    }

    for (int a = 0; a < 2; ++a)
      for (int e = 0; e < 2; ++e)
        for (int r = 0; r < 2; ++r) {
          const double ws = ia.weight[a] * ie.weight[e] * ir.weight[r];
          if (ws == 0.0) continue;
          const auto volume = static_cast<std::size_t>((ia.bin[a] * kEl + ie.bin[e]) * kRad + ir.bin[r]);
          for (int k = 0; k < 2; ++k)
            out.values[volume * kShotCosineBins + static_cast<std::size_t>(ic.bin[k])] += ws * ic.weight[k];
          if (color)
            for (int k = 0; k < 2; ++k)
              out.values[color_offset + volume * kShotColorBins + static_cast<std::size_t>(il.bin[k])] +=
                  ws * il.weight[k];
        }
  }
  out.empty_support = used == 0;
  l2_normalize(out.values);
  return out;
}

int bin_cosine(double c, int bins) {
  return std::clamp(static_cast<int>(std::floor((c + 1.0) * 0.5 * bins)), 0, bins - 1);
}

int bin_theta(double t, int bins) {
  return std::clamp(static_cast<int>(std::floor((t + M_PI) / (2.0 * M_PI) * bins)), 0, bins - 1);
}

void normalize_blocks(std::vector<double>& v, std::size_t block) {
  for (std::size_t start = 0; start < v.size(); start += block) {
    double sum = 0.0;
    for (std::size_t i = start; i < start + block; ++i) sum += v[i];
    if (sum > 0)
      for (std::size_t i = start; i < start + block; ++i) v[i] *= 100.0 / sum;
  }
}

/// Neighbors usable as pair partners: positive distance and a valid normal.
std::vector<Neighbor> usable_neighbors(const PointCloud& cloud, const KdTree3& tree, std::size_t index,
                                       double radius) {
  auto nn = tree.radius_search(cloud[index].position, radius);
  std::erase_if(nn, [&](const Neighbor& n) { return !(n.distance > 0) || !cloud[n.index].has_normal(); });
  return nn;
}

Spfh spfh_from(const PointCloud& cloud, std::span<const Neighbor> neighbors, std::size_t index) {
  Spfh h{};
  const Point3& p = cloud[index];
  if (!p.has_normal()) return h;
  for (const auto& nb : neighbors) {
    const Point3& q = cloud[nb.index];
    const auto f = try_pair_cosines(p.position, p.normal, q.position, q.normal);
    if (!f) continue;
    h[static_cast<std::size_t>(bin_cosine(f->cos_alpha, 11))] += 1.0;
    h[11 + static_cast<std::size_t>(bin_cosine(f->cos_phi, 11))] += 1.0;
    h[22 + static_cast<std::size_t>(bin_theta(f->theta, 11))] += 1.0;
  }
  return h;
}

/// Lazily filled SPFH table for one cloud.
class SpfhCache {
 public:
  SpfhCache(const PointCloud& cloud, const KdTree3& tree, double radius)
      : cloud_(cloud), tree_(tree), radius_(radius), table_(cloud.size()), ready_(cloud.size(), 0) {}

  const Spfh& get(std::size_t i) {
    if (!ready_[i]) {
      table_[i] = spfh_from(cloud_, usable_neighbors(cloud_, tree_, i, radius_), i);
      ready_[i] = 1;
    }
    return table_[i];
  }

 private:
  const PointCloud& cloud_;
  const KdTree3& tree_;
  double radius_;
  std::vector<Spfh> table_;
  std::vector<std::uint8_t> ready_;
};

std::vector<double> fpfh_sum(const PointCloud& cloud, const KdTree3& tree, std::size_t keypoint,
                             double radius, SpfhCache& cache) {
  if (!cloud[keypoint].has_normal()) return {};
  const auto nn = usable_neighbors(cloud, tree, keypoint, radius);
  if (nn.empty()) return {};
  const Spfh& own = cache.get(keypoint);
  std::vector<double> out(own.begin(), own.end());
  const double inv_k = 1.0 / static_cast<double>(nn.size());
  for (const auto& nb : nn) {
    const Spfh& other = cache.get(nb.index);
    const double w = inv_k / nb.distance;
    for (std::size_t b = 0; b < 33; ++b) out[b] += w * other[b];
  }
  return out;
}

}  // namespace

Descriptor shot(const PointCloud& cloud, const KdTree3& tree, std::size_t keypoint,
                const LocalReferenceFrame& lrf, double radius) {
  const auto nn = tree.radius_search(cloud[keypoint].position, radius);
  return shot_impl(cloud, nn, keypoint, lrf, radius, false);
}

Descriptor cshot(const PointCloud& cloud, const KdTree3& tree, std::size_t keypoint,
                 const LocalReferenceFrame& lrf, double radius) {
  if (!cloud.has_rgb()) throw InvalidArgument("CSHOT needs a cloud with RGB");
  const auto nn = tree.radius_search(cloud[keypoint].position, radius);
  return shot_impl(cloud, nn, keypoint, lrf, radius, true);
}

Spfh spfh(const PointCloud& cloud, const KdTree3& tree, std::size_t index, double radius) {
  return spfh_from(cloud, usable_neighbors(cloud, tree, index, radius), index);
}

std::vector<double> fpfh_weighted_sum(const PointCloud& cloud, const KdTree3& tree, std::size_t keypoint,
                                      double radius) {
  SpfhCache cache(cloud, tree, radius);
  return fpfh_sum(cloud, tree, keypoint, radius, cache);
}

std::vector<Descriptor> fpfh(const PointCloud& cloud, const KdTree3& tree,
                             std::span<const std::size_t> keypoints, double radius) {
  if (!(radius > 0)) throw InvalidArgument("descriptor radius must be positive");
  SpfhCache cache(cloud, tree, radius);
  std::vector<Descriptor> out;
  out.reserve(keypoints.size());
  for (auto k : keypoints) {
    Descriptor d{DescriptorFamily::Fpfh, fpfh_sum(cloud, tree, k, radius, cache), k, false};
    if (d.values.empty()) {
      d.values.assign(33, 0.0);
      d.empty_support = true;
    } else {
      normalize_blocks(d.values, 11);
    }
    out.push_back(std::move(d));
  }
  return out;
}

Descriptor pfhrgb(const PointCloud& cloud, const KdTree3& tree, std::size_t keypoint, double radius) {
  if (!cloud.has_rgb()) throw InvalidArgument("PFHRGB needs a cloud with RGB");
  if (!(radius > 0)) throw InvalidArgument("descriptor radius must be positive");
  if (!cloud[keypoint].has_normal()) throw DegenerateGeometry("PFHRGB keypoint has no normal");
  std::vector<std::size_t> support{keypoint};
  for (const auto& nb : usable_neighbors(cloud, tree, keypoint, radius)) support.push_back(nb.index);
  std::sort(support.begin(), support.end());

  Descriptor out{DescriptorFamily::Pfhrgb, std::vector<double>(250, 0.0), keypoint, false};
  std::size_t pairs = 0;
  auto ratio_bin = [](std::uint8_t source, std::uint8_t target) {
    // floor(5 r / (1 + r)) with r = s / t, evaluated exactly on the 8-bit values.
    const int s = std::max<int>(source, 1), t = std::max<int>(target, 1);
    return std::min(4, 5 * s / (s + t));
  };
  for (std::size_t a = 0; a < support.size(); ++a) {
    const Point3& pa = cloud[support[a]];
    for (std::size_t b = a + 1; b < support.size(); ++b) {
      const Point3& pb = cloud[support[b]];
      const auto f = try_pair_cosines(pa.position, pa.normal, pb.position, pb.normal);
      if (!f) continue;
      ++pairs;
      const auto geo = bin_cosine(f->cos_alpha, 5) * 25 + bin_cosine(f->cos_phi, 5) * 5 + bin_theta(f->theta, 5);
      out.values[static_cast<std::size_t>(geo)] += 1.0;
      const Rgb& s = f->swapped ? pb.rgb : pa.rgb;
      const Rgb& t = f->swapped ? pa.rgb : pb.rgb;
      const auto col = ratio_bin(s.r, t.r) * 25 + ratio_bin(s.g, t.g) * 5 + ratio_bin(s.b, t.b);
      out.values[125 + static_cast<std::size_t>(col)] += 1.0;
    }
  }
  if (pairs == 0) throw DegenerateGeometry("PFHRGB support has no usable pair");
  normalize_blocks(out.values, 125);
  return out;
}

std::vector<Descriptor> compute_descriptors(DescriptorFamily family, const PointCloud& cloud,
                                            const KdTree3& tree, std::span<const std::size_t> keypoints,
                                            double radius) {
  if (needs_rgb(family) && !cloud.has_rgb())
    throw InvalidArgument(std::string(to_string(family)) + " needs a cloud with RGB");
  if (family == DescriptorFamily::Fpfh) return fpfh(cloud, tree, keypoints, radius);

  const std::size_t length = descriptor_length(family);
  auto zero = [&](std::size_t k) {
    return Descriptor{family, std::vector<double>(length, 0.0), k, true};
  };
  std::vector<Descriptor> out;
  out.reserve(keypoints.size());
  for (auto k : keypoints) {
    try {
      if (family == DescriptorFamily::Pfhrgb) {
        out.push_back(pfhrgb(cloud, tree, k, radius));
      } else {
        const auto nn = tree.radius_search(cloud[k].position, radius);
        const auto lrf = compute_lrf(cloud, nn, cloud[k].position, radius);
        out.push_back(shot_impl(cloud, nn, k, lrf, radius, family == DescriptorFamily::Cshot));
      }
    } catch (const DegenerateGeometry&) {
      out.push_back(zero(k));
    }
  }
  return out;
}

}  // namespace salboost
