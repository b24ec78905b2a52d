// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tpvocc/augment.hpp"
#include "tpvocc/bench.hpp"
#include "tpvocc/config.hpp"
#include "tpvocc/eval.hpp"
#include "tpvocc/pipeline.hpp"

namespace tpvocc {

// A scene directory holds:
//   scene.json            boxes and ground (synthetic scenes only)
//   rig.json              grid and cameras
//   labels.occg           ground-truth labels
//   mask.occg             visibility mask (two classes)
//   depth_<i>.tnsr        per-camera depth distribution, D x H x W
//   bev_features.tnsr     optional BEV features C x nx x ny
namespace scene_files {
inline constexpr const char* kScene = "scene.json";
inline constexpr const char* kRig = "rig.json";
inline constexpr const char* kLabels = "labels.occg";
inline constexpr const char* kMask = "mask.occg";
inline constexpr const char* kBevFeatures = "bev_features.tnsr";
std::string depth(std::size_t camera);
}  // namespace scene_files

/// Rig, labels, mask and depth distributions read back from a scene dir.
template <typename T>
struct SceneData {
  Rig rig;
  LabeledOccupancy labels;
  VisibilityMask mask;
  PipelineInputs<T> inputs;
};

/// Depth distributions are read as logits when the config names an
/// activation, otherwise as weights. Missing BEV features become zeros with
/// the configured channel count.
template <typename T>
SceneData<T> load_scene_dir(const PipelineConfig& cfg, const std::filesystem::path& dir);

struct SynthSummary {
  std::size_t cameras = 0;
  std::size_t visible_voxels = 0;
  std::size_t occupied_voxels = 0;
};

/// Seeded scene, rendered depth per camera and visibility mask. With a depth
/// activation configured, the depth files hold logits
/// logit_scale * (2 w - 1) so that activation recovers a peaked distribution.
SynthSummary cmd_synth(const PipelineConfig& cfg, const std::filesystem::path& out_dir);

template <typename T>
PipelineParams<T> initial_params(const PipelineConfig& cfg, const GridSpec& grid);

struct PipelineRun {
  Labels prediction;
  EvalReport report;
};

/// Writes the prediction to `out_path` (OCCG) and the report next to it with
/// a .json extension.
PipelineRun cmd_pipeline(const PipelineConfig& cfg, const std::filesystem::path& scene_dir,
                         const std::filesystem::path& out_path);

/// Writes <out_params>/<site>.{weight,bias}.tnsr and loss_trace.json.
FitTrace cmd_fit(const PipelineConfig& cfg, const std::filesystem::path& scene_dir,
                 std::size_t steps, double lr, const std::filesystem::path& out_params);

BenchResult cmd_bench(const PipelineConfig& cfg, BenchMode mode, std::size_t repeats);

struct AugmentSummary {
  std::vector<MixRegion> regions;
  bool mixed = false;
  bool flipped = false;
};

/// CutMix across the given scene dirs (the first is the base sample), then
/// the optional BEV flip. Writes labels, mask, BEV features (when present),
/// rig.json from the first scene and augment.json describing the regions.
AugmentSummary cmd_augment(const PipelineConfig& cfg,
                           const std::vector<std::filesystem::path>& scene_dirs,
                           const std::filesystem::path& out_dir);

EvalReport cmd_eval(const std::filesystem::path& pred, const std::filesystem::path& truth,
                    const std::filesystem::path& mask,
                    const std::optional<std::filesystem::path>& out_json);

/// `view` is "top" or a z index.
void cmd_dump_slice(const std::filesystem::path& grid_path, const std::string& view,
                    const std::filesystem::path& out_image);

}  // namespace tpvocc
