// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "tpvocc/tensor.hpp"
#include "tpvocc/tpv.hpp"

namespace tpvocc {

// Occ3D-nuScenes class set: 17 semantic classes and "free" last.
inline constexpr std::size_t kNumClasses = 18;
inline constexpr std::uint8_t kFreeClass = 17;
inline constexpr std::uint8_t kGroundClass = 11;  // driveable_surface

inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "others",          "barrier",     "bicycle",          "bus",
    "car",             "construction_vehicle",            "motorcycle",
    "pedestrian",      "traffic_cone", "trailer",         "truck",
    "driveable_surface", "other_flat", "sidewalk",        "terrain",
    "manmade",         "vegetation",  "free"};

/// Per-voxel class ids, nx x ny x nz.
struct LabeledOccupancy {
  Labels labels;
  std::size_t num_classes = kNumClasses;

  void validate() const;
};

/// Per-voxel 0/1 visibility flags, nx x ny x nz.
struct VisibilityMask {
  Labels visible;

  std::size_t count() const;
};

/// Elementwise sum of BEV features and the spatial embedding.
template <typename T>
Tensor<T> fuse(const Tensor<T>& bev_features, const Tensor<T>& spatial);

/// (nz * L) x nx x ny -> nx x ny x nz x L; channel c is height c / L and
/// class c % L.
template <typename T>
Tensor<T> channel_to_height(const Tensor<T>& head_out, std::size_t num_classes);

template <typename T>
Tensor<T> height_to_channel(const Tensor<T>& logits);

template <typename T>
struct HeadParams {
  ConvStack<T> bev;  // may be empty
  Conv2dParams<T> head;
};

/// Conv stack outputs kept for the backward pass; [0] is the fused input,
/// back() the head output before the reshape.
template <typename T>
struct HeadCache {
  std::vector<Tensor<T>> acts;
};

template <typename T>
Tensor<T> predict(const Tensor<T>& fused, const HeadParams<T>& params,
                  std::size_t num_classes);

template <typename T>
Tensor<T> predict_forward(const Tensor<T>& fused, const HeadParams<T>& params,
                          std::size_t num_classes, HeadCache<T>& cache);

template <typename T>
struct HeadGrads {
  Tensor<T> fused;
  std::vector<Conv2dGrads<T>> bev;
  Conv2dGrads<T> head;
};

template <typename T>
HeadGrads<T> predict_backward(const HeadParams<T>& params,
                              const HeadCache<T>& cache,
                              const Tensor<T>& grad_logits);

/// Class with the largest logit per voxel; ties go to the lowest index.
template <typename T>
Labels argmax_labels(const Tensor<T>& logits);

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;  // same shape as the logits
};

/// Mean softmax cross-entropy over visible voxels. The gradient is
/// (softmax - onehot) / visible_count and zero at invisible voxels.
template <typename T>
LossResult<T> cross_entropy(const Tensor<T>& logits,
                            const LabeledOccupancy& labels,
                            const VisibilityMask& mask);

/// w <- w - lr * g
template <typename T>
void sgd_step(Tensor<T>& param, const Tensor<T>& grad, double lr);

template <typename T>
void sgd_step(Conv2dParams<T>& params, const Conv2dGrads<T>& grads, double lr);

}  // namespace tpvocc
