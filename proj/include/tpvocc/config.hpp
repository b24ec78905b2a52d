// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "tpvocc/augment.hpp"
#include "tpvocc/geometry.hpp"
#include "tpvocc/synth.hpp"
#include "tpvocc/view_sampling.hpp"

namespace tpvocc {

enum class Precision { kF32, kF64 };

/// Level cameras sharing one optical center, evenly spaced in yaw.
struct RingRig {
  std::size_t count = 2;
  double x = 0.0, y = 0.0, height = 1.8;
  double focal = 9.0;
  std::size_t H = 24, W = 48;
};

/**
 * Everything a command needs besides its input/output paths.
 *
 * JSON keys (all optional): "rig" (path to a rig JSON, relative to the
 * config file), "grid" and "ring" (used when no rig file is given),
 * "channels", "kernel_size", "conv_layers", "bev_layers", "num_classes",
 * "depth" {"d_min", "bin_size", "n_bins", "activation", "render", "decay",
 * "logit_scale"}, "sampling", "mean_over_vanished", "cutmix" {"cut_x",
 * "cut_y", "mix_ratio", "seed", "random_position"}, "flip" {"axis",
 * "probability"}, "scene" {"n_boxes"}, "seed", "precision" ("f32" |
 * "f64"), "deterministic", "init" ("uniform" | "zero"), "params" (directory
 * of per-site TNSR files), "fit" {"steps", "lr"}, "bench" {"repeats"},
 * "workers".
 */
struct PipelineConfig {
  std::filesystem::path base_dir = ".";
  std::optional<std::filesystem::path> rig_path;
  GridSpec grid = GridSpec::from_origin(-3.2, -3.2, -1.0, 0.4, 16, 16, 8);
  RingRig ring;

  std::size_t channels = 8;
  std::size_t kernel_size = 3;
  std::size_t conv_layers = 1;
  std::size_t bev_layers = 1;
  std::size_t num_classes = kNumClasses;

  DepthBins bins{0.2, 0.2, 28};
  DepthActivation activation = DepthActivation::kNone;
  RenderMode render_mode = RenderMode::kOneHot;
  double render_decay = 1.0;
  double logit_scale = 8.0;
  SamplingMode sampling = SamplingMode::kTrilinear;
  bool mean_over_vanished = true;

  CutMixConfig cutmix;
  std::optional<FlipAxis> flip_axis;
  double flip_probability = 0.5;

  std::size_t n_boxes = 3;
  std::uint64_t seed = 7;
  Precision precision = Precision::kF32;
  bool deterministic = true;
  bool zero_init = false;
  std::optional<std::filesystem::path> params_dir;

  std::size_t fit_steps = 200;
  double fit_lr = 0.05;
  std::size_t bench_repeats = 5;
  int workers = 0;  // 0 keeps the runtime default

  static PipelineConfig parse(const std::string& json_text,
                              const std::filesystem::path& base_dir = ".");
  static PipelineConfig load(const std::filesystem::path& path);
  std::string to_json() const;

  void validate() const;

  /// The rig file when one is configured, otherwise the ring rig on `grid`.
  Rig rig() const;
};

}  // namespace tpvocc
