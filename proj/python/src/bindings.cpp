#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "siseg/errors.hpp"
#include "siseg/experiments.hpp"
#include "siseg/inference.hpp"
#include "siseg/weights_io.hpp"

namespace py = pybind11;

namespace {

siseg::ImageVector to_image(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 2) throw siseg::ArgumentError("image must be a 2-D array");
  const auto h = static_cast<std::size_t>(arr.shape(0));
  const auto w = static_cast<std::size_t>(arr.shape(1));
  return {std::vector<double>(arr.data(), arr.data() + h * w), h, w};
}

py::array_t<std::uint8_t> to_array(const siseg::SegmentationMask& mask, std::size_t h, std::size_t w) {
  py::array_t<std::uint8_t> out({h, w});
  std::copy(mask.labels().begin(), mask.labels().end(), out.mutable_data());
  return out;
}

std::vector<std::pair<double, double>> intervals(const siseg::TruncationRegion& region) {
  std::vector<std::pair<double, double>> out;
  for (const auto& iv : region.intervals) out.emplace_back(iv.lo, iv.hi);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Selective inference for piecewise-linear segmentation networks";

  py::register_exception<siseg::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<siseg::FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<siseg::ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<siseg::ArgumentError>(m, "ArgumentError", PyExc_ValueError);

  py::class_<siseg::NetworkSpec>(m, "Network")
      .def_property_readonly("layer_count", [](const siseg::NetworkSpec& n) { return n.layers().size(); })
      .def("layer_kinds", [](const siseg::NetworkSpec& n) {
        std::vector<std::string> kinds;
        for (const auto& l : n.layers()) kinds.push_back(siseg::layer_kind(l));
        return kinds;
      });

  m.def(
      "load_network",
      [](const std::filesystem::path& manifest, std::optional<int> cuts) {
        siseg::LoadOptions options;
        options.smooth_activation_cuts = cuts;
        return siseg::load_network(manifest, options);
      },
      py::arg("manifest"), py::arg("cuts") = py::none());
  m.def("save_network", &siseg::save_network, py::arg("network"), py::arg("directory"),
        py::arg("manifest_name") = "manifest.json");
  m.def("make_cnn4_network", &siseg::experiments::make_cnn4_network, py::arg("side"), py::arg("seed"));
  m.def("make_cnn4_segmenter", &siseg::experiments::make_cnn4_segmenter, py::arg("side"), py::arg("seed"));

  m.def(
      "segment",
      [](const siseg::NetworkSpec& net, const py::array_t<double, py::array::c_style | py::array::forcecast>& image) {
        const auto x = to_image(image);
        return to_array(siseg::forward(net, x), x.height(), x.width());
      },
      py::arg("network"), py::arg("image"));

  m.def("naive_p", &siseg::naive_p, py::arg("z_obs"), py::arg("sigma_eta"));
  m.def(
      "truncated_two_sided_p",
      [](double z_obs, double sigma_eta, const std::vector<std::pair<double, double>>& ivs) {
        siseg::TruncationRegion region;
        for (const auto& [lo, hi] : ivs) region.intervals.push_back({lo, hi});
        return siseg::truncated_two_sided_p(z_obs, sigma_eta, region);
      },
      py::arg("z_obs"), py::arg("sigma_eta"), py::arg("intervals"));

  m.def(
      "selective_test",
      [](const siseg::NetworkSpec& net, const py::array_t<double, py::array::c_style | py::array::forcecast>& image,
         double sigma, double z_range_sigmas, bool oc) {
        const auto x = to_image(image);
        siseg::PipelineOptions options;
        options.z_range_sigmas = z_range_sigmas;
        options.compute_oc = oc;
        siseg::TestResult res;
        {
          py::gil_scoped_release release;
          res = siseg::selective_p_pipeline(net, x, siseg::NoiseModel::isotropic(sigma), options);
        }
        py::dict out;
        out["detected"] = res.detected;
        out["mask"] = to_array(res.mask, x.height(), x.width());
        if (!res.detected) return out;
        out["z_obs"] = res.z_obs;
        out["sigma_eta"] = res.sigma_eta;
        out["p_naive"] = *res.p_naive;
        out["p_selective"] = *res.p_selective;
        out["truncation"] = intervals(res.truncation);
        out["region_count"] = res.region_count;
        if (res.p_oc) {
          out["p_oc"] = *res.p_oc;
          out["oc_truncation"] = intervals(*res.oc_truncation);
        }
        return out;
      },
      py::arg("network"), py::arg("image"), py::arg("sigma") = 1.0, py::arg("z_range_sigmas") = 20.0,
      py::arg("oc") = false);
}
