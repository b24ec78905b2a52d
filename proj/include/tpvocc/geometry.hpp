// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "tpvocc/tensor.hpp"

namespace tpvocc {

/**
 * Axis-aligned perception volume split into cubic voxels.
 *
 * Index (i, j, k) runs along (x, y, z). The metric center of voxel (i, j, k)
 * is (x_min + (i + 0.5) * voxel_size, y_min + (j + 0.5) * voxel_size,
 * z_min + (k + 0.5) * voxel_size). Tensors over the volume are stored
 * x-major: element (i, j, k) sits at flat offset (i * ny + j) * nz + k.
 */
struct GridSpec {
  double x_min = 0.0, x_max = 0.0;
  double y_min = 0.0, y_max = 0.0;
  double z_min = 0.0, z_max = 0.0;
  double voxel_size = 0.0;
  std::size_t nx = 0, ny = 0, nz = 0;

  /// Builds a spec from minimum corner, voxel size and counts; the maxima
  /// are derived so the extent invariant holds.
  static GridSpec from_origin(double x_min, double y_min, double z_min,
                              double voxel_size, std::size_t nx,
                              std::size_t ny, std::size_t nz);

  /// 200 x 200 x 16 voxels of 0.4 m over [-40, 40] x [-40, 40] x [-1, 5.4].
  static GridSpec occ3d();

  /// Throws ConfigError when counts are zero, the voxel size is not
  /// positive, or an extent disagrees with count * voxel_size.
  void validate() const;

  Shape shape() const { return {nx, ny, nz}; }
  std::size_t num_voxels() const { return nx * ny * nz; }
  std::size_t flat(std::size_t i, std::size_t j, std::size_t k) const {
    return (i * ny + j) * nz + k;
  }
  Eigen::Vector3d center(std::size_t i, std::size_t j, std::size_t k) const {
    return {x_min + (static_cast<double>(i) + 0.5) * voxel_size,
            y_min + (static_cast<double>(j) + 0.5) * voxel_size,
            z_min + (static_cast<double>(k) + 0.5) * voxel_size};
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Pinhole camera. Maps a world point p to the camera frame as R * p + t
/// (x right, y down, z along the optical axis). H and W are the feature-map
/// size the camera's depth distribution is defined on.
struct CameraModel {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  std::size_t H = 1, W = 1;

  double fx() const { return K(0, 0); }
  double fy() const { return K(1, 1); }
  double cx() const { return K(0, 2); }
  double cy() const { return K(1, 2); }

  /// Optical center in world coordinates (-R^T t).
  Eigen::Vector3d center() const { return -R.transpose() * t; }

  /// Camera at `position` whose optical axis has the given yaw (radians,
  /// counter-clockwise from world +x) and is level with the ground plane.
  static CameraModel level(const Eigen::Vector3d& position, double yaw,
                           double focal, std::size_t H, std::size_t W);

  void validate() const;
};

/// Ring of `count` level cameras at `position`, evenly spaced in yaw
/// starting at 0.
std::vector<CameraModel> make_ring_rig(const Eigen::Vector3d& position,
                                       std::size_t count, double focal,
                                       std::size_t H, std::size_t W);

struct ImagePoint {
  double d = 0.0;  // metric depth along the optical axis
  double h = 0.0;  // continuous row
  double w = 0.0;  // continuous column
  bool in_frustum = false;
};

inline constexpr double kMinDepth = 1e-6;

/// Uniform depth discretization: bin k covers
/// [d_min + k * bin_size, d_min + (k + 1) * bin_size).
struct DepthBins {
  double d_min = 1.0;
  double bin_size = 0.5;
  std::size_t n_bins = 60;

  void validate() const;
};

struct BinCoord {
  double coord = 0.0;  // continuous coordinate, integer values at bin centers
  bool valid = false;
};

/// Metric centers of every voxel, shape nx x ny x nz x 3.
Tensor<double> voxel_centers(const GridSpec& spec);

/// Projects a world point; d * (w, h, 1)^T = K (R p + t).
ImagePoint project(const CameraModel& cam, const Eigen::Vector3d& p);

/// (d - d_min) / bin_size - 0.5; valid inside [-0.5, n_bins - 0.5].
BinCoord depth_to_bin(double d, const DepthBins& bins);

/// Inverse pinhole map: recovers the world point of an image point.
Eigen::Vector3d unproject(const CameraModel& cam, const ImagePoint& ip);

struct Rig {
  GridSpec grid;
  std::vector<CameraModel> cameras;
};

/// Reads {"grid": {...}, "cameras": [{"K": [9], "R": [9], "t": [3],
/// "H": int, "W": int}]}. K and R are row-major.
Rig load_rig(const std::filesystem::path& path);
Rig parse_rig(const std::string& json_text);
std::string rig_to_json(const Rig& rig);

}  // namespace tpvocc
