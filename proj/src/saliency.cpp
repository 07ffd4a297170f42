#include "salboost/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>

#include <fftw3.h>

namespace salboost {

std::size_t BinaryMask::salient_count() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
}

SaliencyMask load_mask(const std::string& path, std::optional<ImageSize> expected) {
  const GrayImage img = load_pgm(path);
  if (expected && (expected->width != img.width || expected->height != img.height))
    throw InvalidArgument(path + ": mask is " + std::to_string(img.width) + "x" +
                          std::to_string(img.height) + ", expected " + std::to_string(expected->width) +
                          "x" + std::to_string(expected->height));
  SaliencyMask m(img.width, img.height);
  for (std::size_t i = 0; i < img.size(); ++i) m.data[i] = img.data[i] / 255.0;
  return m;
}

void save_mask(const SaliencyMask& mask, const std::string& path) {
  GrayImage img(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.size(); ++i)
    img.data[i] = static_cast<std::uint8_t>(std::lround(std::clamp(mask.data[i], 0.0, 1.0) * 255.0));
  save_pgm(img, path);
}

void save_mask(const BinaryMask& mask, const std::string& path) {
  GrayImage img(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.size(); ++i) img.data[i] = mask.data[i] ? 255 : 0;
  save_pgm(img, path);
}

BinaryMask full_mask(std::uint32_t width, std::uint32_t height) { return BinaryMask(width, height, 1); }

namespace {

using Plane = Raster<double>;

/// Area-weighted resampling: each output pixel averages the source area it covers.
Plane resize_area(const Plane& src, std::uint32_t w, std::uint32_t h) {
  Plane dst(w, h);
  const double sx = static_cast<double>(src.width) / w;
  const double sy = static_cast<double>(src.height) / h;
  for (std::uint32_t r = 0; r < h; ++r) {
    const double y0 = r * sy, y1 = (r + 1) * sy;
    for (std::uint32_t c = 0; c < w; ++c) {
      const double x0 = c * sx, x1 = (c + 1) * sx;
      double acc = 0.0, area = 0.0;
      for (auto yy = static_cast<std::uint32_t>(y0); yy < src.height && yy < y1; ++yy) {
        const double wy = std::min<double>(yy + 1, y1) - std::max<double>(yy, y0);
        if (wy <= 0) continue;
        for (auto xx = static_cast<std::uint32_t>(x0); xx < src.width && xx < x1; ++xx) {
          const double wx = std::min<double>(xx + 1, x1) - std::max<double>(xx, x0);
          if (wx <= 0) continue;
          acc += wx * wy * src(yy, xx);
          area += wx * wy;
        }
      }
      dst(r, c) = area > 0 ? acc / area : 0.0;
    }
  }
  return dst;
}

/// Bilinear resampling with pixel-center alignment and clamped borders.
Plane resize_bilinear(const Plane& src, std::uint32_t w, std::uint32_t h) {
  Plane dst(w, h);
  const double sx = static_cast<double>(src.width) / w;
  const double sy = static_cast<double>(src.height) / h;
  for (std::uint32_t r = 0; r < h; ++r) {
    const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
    const auto y0 = static_cast<std::uint32_t>(fy);
    const std::uint32_t y1 = std::min(y0 + 1, src.height - 1);
    const double ty = fy - y0;
    for (std::uint32_t c = 0; c < w; ++c) {
      const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      const auto x0 = static_cast<std::uint32_t>(fx);
      const std::uint32_t x1 = std::min(x0 + 1, src.width - 1);
      const double tx = fx - x0;
      dst(r, c) = (1 - ty) * ((1 - tx) * src(y0, x0) + tx * src(y0, x1)) +
                  ty * ((1 - tx) * src(y1, x0) + tx * src(y1, x1));
    }
  }
  return dst;
}

Plane resize(const Plane& src, std::uint32_t w, std::uint32_t h) {
  if (w <= src.width && h <= src.height) return resize_area(src, w, h);
  return resize_bilinear(src, w, h);
}

Plane gaussian_blur(const Plane& src, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i + radius)];
  }
  for (auto& v : k) v /= sum;
  const auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
  const int w = static_cast<int>(src.width), h = static_cast<int>(src.height);
  Plane tmp(src.width, src.height), dst(src.width, src.height);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[static_cast<std::size_t>(i + radius)] * src(static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(clampi(c + i, w)));
      tmp(static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)) = acc;
    }
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[static_cast<std::size_t>(i + radius)] * tmp(static_cast<std::uint32_t>(clampi(r + i, h)), static_cast<std::uint32_t>(c));
      dst(static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)) = acc;
    }
  return dst;
}

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
using FftwPlan = std::unique_ptr<fftw_plan_s, FftwPlanDeleter>;

void dft2(std::vector<std::complex<double>>& data, std::uint32_t w, std::uint32_t h, int sign) {
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  FftwPlan plan(fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), buf, buf, sign, FFTW_ESTIMATE));
  fftw_execute(plan.get());
}

}  // namespace

SaliencyMask spectral_residual_saliency(const GrayImage& image) {
  SaliencyMask out(image.width, image.height, 0.0);
  if (image.empty()) return out;
  const auto [lo, hi] = std::minmax_element(image.data.begin(), image.data.end());
  if (*lo == *hi) return out;

  Plane gray(image.width, image.height);
  for (std::size_t i = 0; i < image.size(); ++i) gray.data[i] = image.data[i] / 255.0;

  constexpr double kWorkingSize = 64.0;
  const double scale = kWorkingSize / std::max(image.width, image.height);
  const auto w = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::lround(image.width * scale)));
  const auto h = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::lround(image.height * scale)));
  const Plane small = resize(gray, w, h);

  std::vector<std::complex<double>> spec(small.size());
  for (std::size_t i = 0; i < small.size(); ++i) spec[i] = small.data[i];
  dft2(spec, w, h, FFTW_FORWARD);

  Plane log_amp(w, h), phase(w, h);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    log_amp.data[i] = std::log(std::max(std::abs(spec[i]), 1e-12));
    phase.data[i] = std::arg(spec[i]);
  }
  // 3x3 box average with wrap-around (the spectrum is periodic).
  for (std::uint32_t r = 0; r < h; ++r)
    for (std::uint32_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc)
          acc += log_amp(static_cast<std::uint32_t>((static_cast<int>(r + h) + dr) % static_cast<int>(h)),
                         static_cast<std::uint32_t>((static_cast<int>(c + w) + dc) % static_cast<int>(w)));
      const double residual = log_amp(r, c) - acc / 9.0;
      spec[log_amp.index(r, c)] = std::polar(std::exp(residual), phase(r, c));
    }
  dft2(spec, w, h, FFTW_BACKWARD);

  Plane energy(w, h);
  for (std::size_t i = 0; i < spec.size(); ++i) energy.data[i] = std::norm(spec[i]);
  const Plane blurred = gaussian_blur(energy, 2.5);
  const Plane full = resize_bilinear(blurred, image.width, image.height);

  const auto [mn, mx] = std::minmax_element(full.data.begin(), full.data.end());
  const double range = *mx - *mn;
  if (!(range > 1e-15 * std::max(1.0, std::abs(*mx)))) return out;
  for (std::size_t i = 0; i < full.size(); ++i)
    out.data[i] = std::clamp((full.data[i] - *mn) / range, 0.0, 1.0);
  return out;
}

SaliencyMask spectral_residual_saliency(const RgbImage& image) {
  return spectral_residual_saliency(to_gray(image));
}

BinaryMask dilate(const BinaryMask& mask, std::uint32_t radius) {
  if (radius == 0 || mask.empty()) return mask;
  const auto w = static_cast<std::int64_t>(mask.width), h = static_cast<std::int64_t>(mask.height);
  const auto rad = static_cast<std::int64_t>(radius);
  BinaryMask rows(mask.width, mask.height, 0), out(mask.width, mask.height, 0);
  // Separable square max filter.
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c) {
      if (!mask.data[static_cast<std::size_t>(r * w + c)]) continue;
      for (std::int64_t cc = std::max<std::int64_t>(0, c - rad); cc <= std::min(w - 1, c + rad); ++cc)
        rows.data[static_cast<std::size_t>(r * w + cc)] = 1;
    }
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c) {
      if (!rows.data[static_cast<std::size_t>(r * w + c)]) continue;
      for (std::int64_t rr = std::max<std::int64_t>(0, r - rad); rr <= std::min(h - 1, r + rad); ++rr)
        out.data[static_cast<std::size_t>(rr * w + c)] = 1;
    }
  return out;
}

BinaryMask binarize(const SaliencyMask& mask, double threshold, std::uint32_t dilate_px) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidArgument("threshold must lie in (0, 1)");
  BinaryMask out(mask.width, mask.height, 0);
  for (std::size_t i = 0; i < mask.size(); ++i) out.data[i] = mask.data[i] >= threshold ? 1 : 0;
  return dilate(out, dilate_px);
}

SubCloud filter_cloud(const PointCloud& cloud, const BinaryMask& mask) {
  if (!cloud.organized()) throw InvalidArgument("saliency filtering needs an organized cloud");
  if (mask.width != cloud.width() || mask.height != cloud.height())
    throw InvalidArgument("mask is " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                          ", cloud is " + std::to_string(cloud.width()) + "x" +
                          std::to_string(cloud.height()));
  SubCloud out;
  std::vector<Point3> pts;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!cloud[i].valid() || !mask.data[i]) continue;
    pts.push_back(cloud[i]);
    out.source_index.push_back(i);
  }
  out.cloud = PointCloud::unorganized(std::move(pts), cloud.has_rgb(), cloud.has_normals());
  return out;
}

}  // namespace salboost
