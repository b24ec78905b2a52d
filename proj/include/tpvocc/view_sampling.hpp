// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "tpvocc/geometry.hpp"
#include "tpvocc/tensor.hpp"

namespace tpvocc {

enum class DepthActivation { kSigmoid, kSoftmax, kNone };

DepthActivation parse_activation(const std::string& name);
std::string to_string(DepthActivation a);

/// Per-camera depth weights, shape D x H x W with D = bins.n_bins.
template <typename T>
struct DepthDistribution {
  Tensor<T> values;
  DepthBins bins;
  DepthActivation activation = DepthActivation::kNone;

  std::size_t depth() const { return values.dim(0); }
  std::size_t height() const { return values.dim(1); }
  std::size_t width() const { return values.dim(2); }
};

/// Shape information the backward pass needs for one camera.
struct DepthLayout {
  DepthBins bins;
  std::size_t H = 0, W = 0;
};

template <typename T>
DepthLayout layout_of(const DepthDistribution<T>& dist) {
  return {dist.bins, dist.height(), dist.width()};
}

// How a continuous (d_bin, h, w) coordinate reads the distribution.
enum class SamplingMode {
  kTrilinear,              // 8 lattice corners over (d_bin, h, w)
  kNearestDepthBilinear,   // rounded depth bin, 4 corners over (h, w)
};

SamplingMode parse_sampling_mode(const std::string& name);

/// Elementwise sigmoid, or softmax along the depth axis.
template <typename T>
DepthDistribution<T> activate_depth(const Tensor<T>& logits,
                                    DepthActivation mode,
                                    const DepthBins& bins);

/// Trilinear read with zero padding: lattice points outside the tensor
/// contribute nothing.
template <typename T>
T sample_trilinear(const Tensor<T>& values, double d_bin, double h, double w);

template <typename T>
T sample(const Tensor<T>& values, double d_bin, double h, double w,
         SamplingMode mode);

/// O(x, y, z) = sum over cameras of the distribution sampled where the
/// voxel center projects. Output shape nx x ny x nz. Cameras are summed in
/// ascending index order; voxels outside a camera's frustum or depth range
/// receive nothing from it.
template <typename T>
Tensor<T> global_spatial_sampling(std::span<const DepthDistribution<T>> dists,
                                  std::span<const CameraModel> cams,
                                  const GridSpec& spec,
                                  SamplingMode mode = SamplingMode::kTrilinear);

/// Adjoint of global_spatial_sampling: scatters each voxel's upstream
/// gradient back to the lattice corners it read, with the same weights.
template <typename T>
std::vector<Tensor<T>> global_spatial_sampling_backward(
    const Tensor<T>& upstream, std::span<const CameraModel> cams,
    const GridSpec& spec, std::span<const DepthLayout> layouts,
    SamplingMode mode = SamplingMode::kTrilinear);

}  // namespace tpvocc
