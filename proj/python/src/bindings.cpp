// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tpvocc/commands.hpp"
#include "tpvocc/eval.hpp"
#include "tpvocc/geometry.hpp"
#include "tpvocc/head.hpp"
#include "tpvocc/parallel.hpp"
#include "tpvocc/tpv.hpp"
#include "tpvocc/view_sampling.hpp"

namespace py = pybind11;
using namespace tpvocc;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

template <typename T, typename A>
Tensor<T> to_tensor(const A& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor<T>(std::move(shape), std::vector<T>(a.data(), a.data() + a.size()));
}

template <typename T>
py::array_t<T> to_array(const Tensor<T>& t) {
  py::array_t<T> out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.ptr(), t.ptr() + t.size(), out.mutable_data());
  return out;
}

Labels to_labels(const LabelArray& a, const char* what) {
  if (a.ndim() != 3) throw ShapeError(std::string(what) + " must be 3-D");
  return to_tensor<std::uint8_t>(a);
}

Conv2dParams<double> to_conv(const py::tuple& wb) {
  if (wb.size() != 2) throw ShapeError("a convolution is a (weight, bias) pair");
  return {to_tensor<double>(wb[0].cast<Array>()), to_tensor<double>(wb[1].cast<Array>())};
}

ConvStack<double> to_stack(const py::object& site) {
  if (py::isinstance<py::tuple>(site)) return {to_conv(site.cast<py::tuple>())};
  ConvStack<double> s;
  for (const auto& layer : site.cast<py::list>()) s.push_back(to_conv(layer.cast<py::tuple>()));
  return s;
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["miou"] = r.total() ? r.miou() : std::nan("");
  py::list per;
  for (const auto& v : r.per_class_iou()) {
    per.append(v ? py::cast(*v) : py::none());
  }
  d["per_class"] = per;
  const std::size_t L = r.num_classes();
  py::array_t<std::uint64_t> conf({L, L});
  std::copy(r.confusion().begin(), r.confusion().end(), conf.mutable_data());
  d["confusion"] = conf;
  return d;
}

}  // namespace

PYBIND11_MODULE(_tpvocc, m) {
  m.doc() = "Tri-perspective-view occupancy kernels";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_IOError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.attr("NUM_CLASSES") = kNumClasses;
  m.attr("FREE_CLASS") = kFreeClass;
  m.attr("GROUND_CLASS") = kGroundClass;

  m.def("set_num_workers", &set_num_workers, py::arg("n"));
  m.def("num_workers", &num_workers);

  py::class_<GridSpec>(m, "GridSpec")
      .def_static("from_origin", &GridSpec::from_origin, py::arg("x_min"), py::arg("y_min"),
                  py::arg("z_min"), py::arg("voxel_size"), py::arg("nx"), py::arg("ny"),
                  py::arg("nz"))
      .def_static("occ3d", &GridSpec::occ3d)
      .def_readonly("x_min", &GridSpec::x_min)
      .def_readonly("y_min", &GridSpec::y_min)
      .def_readonly("z_min", &GridSpec::z_min)
      .def_readonly("voxel_size", &GridSpec::voxel_size)
      .def_readonly("nx", &GridSpec::nx)
      .def_readonly("ny", &GridSpec::ny)
      .def_readonly("nz", &GridSpec::nz)
      .def_property_readonly("shape",
                             [](const GridSpec& g) { return py::make_tuple(g.nx, g.ny, g.nz); })
      .def("center", &GridSpec::center, py::arg("i"), py::arg("j"), py::arg("k"));

  py::class_<CameraModel>(m, "CameraModel")
      .def(py::init<>())
      .def_static("level", &CameraModel::level, py::arg("position"), py::arg("yaw"),
                  py::arg("focal"), py::arg("H"), py::arg("W"))
      .def_readwrite("K", &CameraModel::K)
      .def_readwrite("R", &CameraModel::R)
      .def_readwrite("t", &CameraModel::t)
      .def_readwrite("H", &CameraModel::H)
      .def_readwrite("W", &CameraModel::W)
      .def("validate", &CameraModel::validate)
      .def("project", [](const CameraModel& c, const Eigen::Vector3d& p) {
        const auto ip = project(c, p);
        return py::make_tuple(ip.d, ip.h, ip.w, ip.in_frustum);
      });

  m.def("make_ring_rig", &make_ring_rig, py::arg("position"), py::arg("count"),
        py::arg("focal"), py::arg("H"), py::arg("W"));

  m.def(
      "global_spatial_sampling",
      [](const std::vector<Array>& dists, const std::vector<CameraModel>& cams,
         const GridSpec& grid, double d_min, double bin_size, const std::string& mode) {
        std::vector<DepthDistribution<double>> d;
        for (const auto& a : dists) {
          auto t = to_tensor<double>(a);
          if (t.rank() != 3) throw ShapeError("each distribution must be D x H x W");
          const DepthBins bins{d_min, bin_size, t.dim(0)};
          d.push_back({std::move(t), bins, DepthActivation::kNone});
        }
        const SamplingMode sm = parse_sampling_mode(mode);
        Tensor<double> occ;
        {
          py::gil_scoped_release release;
          occ = global_spatial_sampling<double>(d, cams, grid, sm);
        }
        return to_array(occ);
      },
      py::arg("dists"), py::arg("cameras"), py::arg("grid"), py::arg("d_min"),
      py::arg("bin_size"), py::arg("mode") = "trilinear");

  m.def(
      "tpv_matmul",
      [](const Array& lhs, const Array& rhs, bool mean) {
        return to_array(tpv_matmul(to_tensor<double>(lhs), to_tensor<double>(rhs), mean));
      },
      py::arg("lhs"), py::arg("rhs"), py::arg("mean_over_vanished") = true);

  m.def(
      "conv2d",
      [](const Array& x, const Array& w, const Array& b) {
        return to_array(conv2d(to_tensor<double>(x), {to_tensor<double>(w), to_tensor<double>(b)}));
      },
      py::arg("input"), py::arg("weight"), py::arg("bias"));

  m.def(
      "lti_interact",
      [](const Array& bev, const Array& fv, const Array& sv, const py::dict& convs, bool mean) {
        const TpvEmbeddings<double> e{to_tensor<double>(bev), to_tensor<double>(fv),
                                      to_tensor<double>(sv)};
        const LtiConvs<double> c{to_stack(convs["bev"]), to_stack(convs["fv"]),
                                 to_stack(convs["sv"]), to_stack(convs["fuse"])};
        return to_array(lti_interact(e, c, mean));
      },
      py::arg("bev"), py::arg("fv"), py::arg("sv"), py::arg("convs"),
      py::arg("mean_over_vanished") = true,
      "convs maps bev/fv/sv/fuse to a (weight, bias) pair or a list of them.");

  m.def(
      "channel_to_height",
      [](const Array& x, std::size_t num_classes) {
        return to_array(channel_to_height(to_tensor<double>(x), num_classes));
      },
      py::arg("head_out"), py::arg("num_classes") = kNumClasses);

  m.def(
      "evaluate",
      [](const LabelArray& pred, const LabelArray& truth, const LabelArray& mask,
         std::size_t num_classes, std::optional<std::size_t> free_class) {
        const auto r = evaluate(to_labels(pred, "pred"), to_labels(truth, "truth"),
                                VisibilityMask{to_labels(mask, "mask")}, num_classes,
                                free_class ? *free_class : kNoFreeClass);
        return report_dict(r);
      },
      py::arg("pred"), py::arg("truth"), py::arg("mask"), py::arg("num_classes") = kNumClasses,
      py::arg("free_class") = std::optional<std::size_t>(kFreeClass),
      "Masked confusion matrix and IoUs; free_class=None treats every class as semantic.");

  // Commands take the config as a JSON string (relative paths resolve
  // against base_dir).
  m.def(
      "synth",
      [](const std::string& config, const std::filesystem::path& out_dir,
         const std::filesystem::path& base_dir) {
        const auto s = cmd_synth(PipelineConfig::parse(config, base_dir), out_dir);
        py::dict d;
        d["cameras"] = s.cameras;
        d["visible_voxels"] = s.visible_voxels;
        d["occupied_voxels"] = s.occupied_voxels;
        return d;
      },
      py::arg("config"), py::arg("out_dir"), py::arg("base_dir") = ".");

  m.def(
      "pipeline",
      [](const std::string& config, const std::filesystem::path& scene_dir,
         const std::filesystem::path& out_path, const std::filesystem::path& base_dir) {
        const auto run = cmd_pipeline(PipelineConfig::parse(config, base_dir), scene_dir, out_path);
        py::dict d = report_dict(run.report);
        d["prediction"] = to_array(run.prediction);
        return d;
      },
      py::arg("config"), py::arg("scene_dir"), py::arg("out_path"), py::arg("base_dir") = ".");

  m.def(
      "fit",
      [](const std::string& config, const std::filesystem::path& scene_dir, std::size_t steps,
         double lr, const std::filesystem::path& out_params,
         const std::filesystem::path& base_dir) {
        return cmd_fit(PipelineConfig::parse(config, base_dir), scene_dir, steps, lr,
                       out_params)
            .loss;
      },
      py::arg("config"), py::arg("scene_dir"), py::arg("steps"), py::arg("lr"),
      py::arg("out_params"), py::arg("base_dir") = ".",
      "Returns the loss before each step followed by the final loss.");
}
