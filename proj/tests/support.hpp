// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

// Helpers shared by the unit, integration and acceptance tests.

#pragma once

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "tpvocc/augment.hpp"
#include "tpvocc/geometry.hpp"
#include "tpvocc/random.hpp"
#include "tpvocc/synth.hpp"
#include "tpvocc/tensor.hpp"
#include "tpvocc/tpv.hpp"

namespace tpvocc::testing {

template <typename T>
Tensor<T> random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
Conv2dParams<T> random_conv(std::size_t c_out, std::size_t c_in, std::size_t k, Rng& rng) {
  return {random_tensor<T>({c_out, c_in, k, k}, rng, -0.5, 0.5),
          random_tensor<T>({c_out}, rng, -0.5, 0.5)};
}

/// Camera at `pos` looking at `target` with the world z axis up.
inline CameraModel look_at(const Eigen::Vector3d& pos, const Eigen::Vector3d& target,
                           double focal, std::size_t H, std::size_t W) {
  const Eigen::Vector3d fwd = (target - pos).normalized();
  const Eigen::Vector3d right = fwd.cross(Eigen::Vector3d::UnitZ()).normalized();
  const Eigen::Vector3d down = fwd.cross(right);
  CameraModel cam;
  cam.R.row(0) = right.transpose();
  cam.R.row(1) = down.transpose();
  cam.R.row(2) = fwd.transpose();
  cam.t = -cam.R * pos;
  cam.K << focal, 0, (static_cast<double>(W) - 1) / 2, 0, focal,
      (static_cast<double>(H) - 1) / 2, 0, 0, 1;
  cam.H = H;
  cam.W = W;
  return cam;
}

/// Camera on a circle around the grid center, aimed near the center.
inline CameraModel random_camera(const GridSpec& g, Rng& rng, std::size_t H, std::size_t W) {
  const Eigen::Vector3d c = g.center(g.nx / 2, g.ny / 2, g.nz / 2);
  const double a = rng.uniform(0.0, 2.0 * M_PI);
  const double r = rng.uniform(3.0, 5.0);
  const Eigen::Vector3d pos = c + Eigen::Vector3d(r * std::cos(a), r * std::sin(a),
                                                  rng.uniform(0.5, 2.0));
  const Eigen::Vector3d target = c + Eigen::Vector3d(rng.uniform(-0.5, 0.5),
                                                     rng.uniform(-0.5, 0.5),
                                                     rng.uniform(-0.5, 0.5));
  return look_at(pos, target, rng.uniform(6.0, 12.0), H, W);
}

/// ||a - b|| / max(||a||, ||b||, floor)
template <typename T>
double rel_error(const Tensor<T>& a, const Tensor<T>& b, double floor = 1e-12) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = static_cast<double>(a[i]), y = static_cast<double>(b[i]);
    diff += (x - y) * (x - y);
    na += x * x;
    nb += y * y;
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("tpvocc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Labels and visibility of `scene` under `cams`, with random C-channel
/// BEV features.
template <typename T>
SceneBundle<T> make_bundle(const SyntheticScene& scene, std::span<const CameraModel> cams,
                           std::size_t channels, Rng& rng) {
  const GridSpec& g = scene.spec;
  return {random_tensor<T>({channels, g.nx, g.ny}, rng), scene.labels,
          compute_visibility(scene, cams)};
}

/// Two level cameras back to back at the grid centre, 1.8 m up.
inline std::vector<CameraModel> centre_rig(const GridSpec& g) {
  const Eigen::Vector3d c = 0.5 * (Eigen::Vector3d(g.x_min, g.y_min, 0) +
                                   Eigen::Vector3d(g.x_max, g.y_max, 0));
  return make_ring_rig({c.x(), c.y(), 1.8}, 2, 9.0, 24, 48);
}

inline GridSpec small_grid() { return GridSpec::from_origin(-3.2, -3.2, -1.0, 0.4, 16, 16, 8); }

}  // namespace tpvocc::testing
