// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tpvocc/geometry.hpp"
#include "tpvocc/head.hpp"
#include "tpvocc/view_sampling.hpp"

namespace tpvocc {

struct Box {
  Eigen::Vector3d lo;
  Eigen::Vector3d hi;
  std::uint8_t cls = 0;
};

struct GroundPlane {
  double z = 0.0;  // voxels whose lower face is at or below z are ground
  std::uint8_t cls = kGroundClass;
};

struct SyntheticScene {
  GridSpec spec;
  LabeledOccupancy labels;
  std::vector<Box> boxes;
  std::optional<GroundPlane> ground;
};

/// Labels voxels by center containment; later boxes overwrite earlier ones
/// and the ground layer, everything else is free.
LabeledOccupancy rasterize(const GridSpec& spec, std::span<const Box> boxes,
                           const std::optional<GroundPlane>& ground,
                           std::size_t num_classes = kNumClasses);

/// Ground layer at z_min plus `n_boxes` random voxel-aligned boxes standing
/// on it. Boxes stay clear of the four central pillars, where the synthetic
/// camera rigs sit.
SyntheticScene generate_scene(const GridSpec& spec, std::size_t n_boxes,
                              std::uint64_t seed);

SyntheticScene make_scene(const GridSpec& spec, std::vector<Box> boxes,
                          std::optional<GroundPlane> ground);

/// Calls `visit(i, j, k, t_enter, t_exit)` for each voxel the ray
/// origin + t * dir crosses for t in [0, t_max], in order, until it
/// returns false. Voxels can be reported with zero length where the ray
/// passes exactly through an edge.
void traverse_voxels(
    const GridSpec& spec, const Eigen::Vector3d& origin,
    const Eigen::Vector3d& dir, double t_max,
    const std::function<bool(std::size_t, std::size_t, std::size_t, double,
                             double)>& visit);

enum class RenderMode { kOneHot, kSigmoidLike };

RenderMode parse_render_mode(const std::string& name);

/// Casts one ray per feature pixel through its center and writes weight at
/// the bin holding the depth where the ray enters its first non-free voxel.
/// kSigmoidLike also fills later bins with decay^(bin - hit).
template <typename T>
DepthDistribution<T> render_depth_distribution(const SyntheticScene& scene,
                                               const CameraModel& cam,
                                               const DepthBins& bins,
                                               RenderMode mode,
                                               double decay = 1.0);

/// A voxel is visible when some camera sees its center inside the frustum
/// and the segment from the optical center to the voxel center crosses no
/// non-free voxel before reaching it.
VisibilityMask compute_visibility(const SyntheticScene& scene,
                                  std::span<const CameraModel> cams);

VisibilityMask compute_visibility(const GridSpec& spec, const Labels& labels,
                                  std::span<const CameraModel> cams);

std::string scene_to_json(const SyntheticScene& scene);

/// Rebuilds boxes and ground from JSON and re-rasterizes the labels.
SyntheticScene scene_from_json(const std::string& text);

}  // namespace tpvocc
