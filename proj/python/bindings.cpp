#include <optional>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "salboost/benchmark.hpp"
#include "salboost/descriptors.hpp"
#include "salboost/detectors.hpp"
#include "salboost/error.hpp"
#include "salboost/evaluation.hpp"
#include "salboost/geometry.hpp"
#include "salboost/io.hpp"
#include "salboost/recognition.hpp"
#include "salboost/saliency.hpp"
#include "salboost/synthetic.hpp"

namespace py = pybind11;
using namespace salboost;

namespace {

using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U8 = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

void require_shape(const py::buffer_info& info, py::ssize_t cols, const char* what) {
  if (info.ndim != 2 || info.shape[1] != cols)
    throw InvalidArgument(std::string(what) + " must have shape (n, " + std::to_string(cols) + ")");
}

PointCloud make_cloud(const F64& xyz, const std::optional<U8>& rgb, const std::optional<F64>& normals,
                      std::uint32_t width, std::uint32_t height) {
  const auto p = xyz.request();
  require_shape(p, 3, "xyz");
  const auto n = static_cast<std::size_t>(p.shape[0]);
  std::vector<Point3> pts(n);
  const double* xp = xyz.data();
  for (std::size_t i = 0; i < n; ++i) pts[i].position = Vec3(xp[3 * i], xp[3 * i + 1], xp[3 * i + 2]);
  if (rgb) {
    const auto c = rgb->request();
    require_shape(c, 3, "rgb");
    if (static_cast<std::size_t>(c.shape[0]) != n) throw InvalidArgument("rgb and xyz lengths differ");
    const auto* cp = rgb->data();
    for (std::size_t i = 0; i < n; ++i) pts[i].rgb = Rgb{cp[3 * i], cp[3 * i + 1], cp[3 * i + 2]};
  }
  if (normals) {
    const auto m = normals->request();
    require_shape(m, 3, "normals");
    if (static_cast<std::size_t>(m.shape[0]) != n) throw InvalidArgument("normals and xyz lengths differ");
    const double* np = normals->data();
    for (std::size_t i = 0; i < n; ++i) pts[i].normal = Vec3(np[3 * i], np[3 * i + 1], np[3 * i + 2]);
  }
  if (height == 0) return PointCloud::unorganized(std::move(pts), rgb.has_value(), normals.has_value());
  return PointCloud(std::move(pts), width, height, rgb.has_value(), normals.has_value());
}

template <typename Get>
py::array_t<double> vec_column(const PointCloud& cloud, Get get) {
  py::array_t<double> out({static_cast<py::ssize_t>(cloud.size()), py::ssize_t{3}});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& x = get(cloud[i]);
    for (py::ssize_t k = 0; k < 3; ++k) v(static_cast<py::ssize_t>(i), k) = x[k];
  }
  return out;
}

GrayImage gray_of(const U8& image) {
  const auto info = image.request();
  if (info.ndim != 2) throw InvalidArgument("image must be a 2-D uint8 array");
  GrayImage g(static_cast<std::uint32_t>(info.shape[1]), static_cast<std::uint32_t>(info.shape[0]));
  std::copy_n(image.data(), g.size(), g.data.begin());
  return g;
}

std::vector<std::size_t> indices_of(const PointCloud& cloud, const std::vector<std::size_t>& indices) {
  for (auto i : indices)
    if (i >= cloud.size()) throw InvalidArgument("keypoint index out of range");
  return indices;
}

CloudFormat parse_format(const std::string& name) {
  if (name == "pcd_ascii") return CloudFormat::PcdAscii;
  if (name == "pcd_binary") return CloudFormat::PcdBinary;
  if (name == "ply") return CloudFormat::PlyAscii;
  throw InvalidArgument("unknown cloud format '" + name + "' (pcd_ascii, pcd_binary, ply)");
}

}  // namespace

PYBIND11_MODULE(_salboost, m) {
  m.doc() = "Saliency-boosted 3D object recognition";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<DegenerateGeometry>(m, "DegenerateGeometry", base.ptr());

  py::class_<PointCloud>(m, "PointCloud")
      .def(py::init(&make_cloud), py::arg("xyz"), py::arg("rgb") = py::none(), py::arg("normals") = py::none(),
           py::arg("width") = 0, py::arg("height") = 0)
      .def("__len__", &PointCloud::size)
      .def_property_readonly("width", &PointCloud::width)
      .def_property_readonly("height", &PointCloud::height)
      .def_property_readonly("organized", &PointCloud::organized)
      .def_property_readonly("has_rgb", &PointCloud::has_rgb)
      .def_property_readonly("has_normals", &PointCloud::has_normals)
      .def_property_readonly("valid_count", &PointCloud::valid_count)
      .def_property_readonly("xyz", [](const PointCloud& c) { return vec_column(c, [](const Point3& p) -> const Vec3& { return p.position; }); })
      .def_property_readonly("normals", [](const PointCloud& c) { return vec_column(c, [](const Point3& p) -> const Vec3& { return p.normal; }); })
      .def_property_readonly("rgb", [](const PointCloud& c) {
        py::array_t<std::uint8_t> out({static_cast<py::ssize_t>(c.size()), py::ssize_t{3}});
        auto v = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < c.size(); ++i) {
          const auto s = static_cast<py::ssize_t>(i);
          v(s, 0) = c[i].rgb.r;
          v(s, 1) = c[i].rgb.g;
          v(s, 2) = c[i].rgb.b;
        }
        return out;
      })
      .def("__eq__", [](const PointCloud& a, const PointCloud& b) { return a == b; });

  m.def("load_cloud", &load_cloud, py::arg("path"));
  m.def(
      "save_cloud", [](const PointCloud& c, const std::string& path, const std::string& format) {
        save_cloud(c, path, parse_format(format));
      },
      py::arg("cloud"), py::arg("path"), py::arg("format") = "pcd_binary");

  m.def(
      "estimate_normals",
      [](const PointCloud& c, std::size_t k, const Vec3& viewpoint) { return estimate_normals(c, KdTree3(c), k, viewpoint); },
      py::arg("cloud"), py::arg("k") = 10, py::arg("viewpoint") = Vec3(Vec3::Zero()));

  m.def(
      "uniform_sampling", [](const PointCloud& c, double leaf) { return uniform_sampling(c, leaf).indices; },
      py::arg("cloud"), py::arg("leaf"));
  m.def(
      "iss_detect",
      [](const PointCloud& c, double salient_radius, double nms_radius, double gamma21, double gamma32,
         std::size_t min_neighbors) {
        return iss_detect(c, KdTree3(c), IssParams{salient_radius, nms_radius, gamma21, gamma32, min_neighbors}).indices;
      },
      py::arg("cloud"), py::arg("salient_radius") = IssParams{}.salient_radius,
      py::arg("nms_radius") = IssParams{}.nms_radius, py::arg("gamma21") = IssParams{}.gamma21,
      py::arg("gamma32") = IssParams{}.gamma32, py::arg("min_neighbors") = IssParams{}.min_neighbors);
  m.def(
      "fast_detect",
      [](const U8& image, int threshold, bool nms) {
        std::vector<std::tuple<std::uint32_t, std::uint32_t, int>> out;
        for (const auto& c : fast_detect(gray_of(image), threshold, nms)) out.emplace_back(c.pixel.row, c.pixel.col, c.score);
        return out;
      },
      py::arg("image"), py::arg("threshold") = 20, py::arg("nms") = true);

  m.def("descriptor_length", [](const std::string& family) { return descriptor_length(parse_descriptor_family(family)); });
  m.def(
      "compute_descriptors",
      [](const std::string& family, const PointCloud& c, const std::vector<std::size_t>& keypoints, double radius) {
        const auto fam = parse_descriptor_family(family);
        const auto kps = indices_of(c, keypoints);
        const auto ds = compute_descriptors(fam, c, KdTree3(c), kps, radius);
        const auto dim = static_cast<py::ssize_t>(descriptor_length(fam));
        py::array_t<double> values({static_cast<py::ssize_t>(ds.size()), dim});
        py::array_t<bool> empty(static_cast<py::ssize_t>(ds.size()));
        auto v = values.mutable_unchecked<2>();
        auto e = empty.mutable_unchecked<1>();
        for (std::size_t i = 0; i < ds.size(); ++i) {
          for (py::ssize_t k = 0; k < dim; ++k) v(static_cast<py::ssize_t>(i), k) = ds[i].values[static_cast<std::size_t>(k)];
          e(static_cast<py::ssize_t>(i)) = ds[i].empty_support;
        }
        return py::make_tuple(values, empty);
      },
      py::arg("family"), py::arg("cloud"), py::arg("keypoints"), py::arg("radius") = kDefaultDescriptorRadius);

  m.def(
      "spectral_residual_saliency",
      [](const U8& image) {
        const auto s = spectral_residual_saliency(gray_of(image));
        py::array_t<double> out({static_cast<py::ssize_t>(s.height), static_cast<py::ssize_t>(s.width)});
        std::copy(s.data.begin(), s.data.end(), out.mutable_data());
        return out;
      },
      py::arg("image"));

  m.def(
      "estimate_pose",
      [](const F64& model, const F64& scene) {
        require_shape(model.request(), 3, "model");
        require_shape(scene.request(), 3, "scene");
        auto rows = [](const F64& a) {
          std::vector<Vec3> out(static_cast<std::size_t>(a.shape(0)));
          for (std::size_t i = 0; i < out.size(); ++i) out[i] = Vec3(a.data()[3 * i], a.data()[3 * i + 1], a.data()[3 * i + 2]);
          return out;
        };
        return Mat4(estimate_pose(rows(model), rows(scene)).matrix());
      },
      py::arg("model"), py::arg("scene"));

  m.def(
      "auc",
      [](const std::vector<std::pair<double, double>>& recall_precision) {
        std::vector<PrcPoint> pts;
        for (const auto& [r, p] : recall_precision) pts.push_back({3 + pts.size(), p, r});
        return auc(pts);
      },
      py::arg("recall_precision"));
  m.def("percent_change", &percent_change, py::arg("lp"), py::arg("boost"));

  m.def(
      "run_benchmark",
      [](const std::string& config_json) {
        const auto config = parse_bench_config(config_json);
        EvalReport report;
        {
          py::gil_scoped_release release;
          report = run_benchmark(config);
        }
        return report_json(report);
      },
      py::arg("config_json") = "{}");
}
