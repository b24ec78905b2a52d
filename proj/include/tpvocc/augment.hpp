// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tpvocc/head.hpp"
#include "tpvocc/tensor.hpp"

namespace tpvocc {

/// One post-view-transform training sample: BEV features C x nx x ny (C may
/// be 0) with the labels and visibility mask over nx x ny x nz.
template <typename T>
struct SceneBundle {
  Tensor<T> features;
  LabeledOccupancy labels;
  VisibilityMask mask;
};

struct CutMixConfig {
  bool cut_x = true;
  bool cut_y = false;
  double mix_ratio = 1.0;
  std::uint64_t seed = 0;
  // Cut at uniformly drawn interior planes instead of the grid center.
  // Breaks occlusion consistency; kept for the negative test.
  bool random_position = false;

  void validate() const;
};

/// Half-open pillar range [x0, x1) x [y0, y1) copied from `donor`.
struct MixRegion {
  std::size_t x0, x1, y0, y1;
  std::size_t donor;
};

template <typename T>
struct CutMixResult {
  SceneBundle<T> bundle;
  std::vector<MixRegion> regions;
  bool mixed = false;

  std::size_t donor_at(std::size_t i, std::size_t j) const;
};

/// Cuts the BEV plane at nx / 2 and/or ny / 2 (the upper part takes the
/// center index on odd sizes) and fills every part verbatim from a donor
/// drawn uniformly per part. With probability 1 - mix_ratio, or when no cut
/// axis is enabled, returns sample 0 unchanged.
template <typename T>
CutMixResult<T> cutmix(std::span<const SceneBundle<T>> samples,
                       const CutMixConfig& cfg);

enum class FlipAxis { kX, kY };

/// Reverses one BEV axis of features, labels and mask.
template <typename T>
SceneBundle<T> flip_bundle(const SceneBundle<T>& bundle, FlipAxis axis);

/// flip_bundle applied with the given probability.
template <typename T>
SceneBundle<T> bev_flip(const SceneBundle<T>& bundle, FlipAxis axis,
                        double probability, std::uint64_t seed);

Labels flip_labels(const Labels& labels, FlipAxis axis);

}  // namespace tpvocc
