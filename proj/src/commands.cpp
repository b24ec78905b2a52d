// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpvocc/commands.hpp"

#include <json.hpp>

#include "tpvocc/io.hpp"
#include "tpvocc/synth.hpp"

namespace tpvocc {

namespace fs = std::filesystem;
using nlohmann::json;

std::string scene_files::depth(std::size_t camera) {
  return "depth_" + std::to_string(camera) + ".tnsr";
}

namespace {

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw DataError("cannot create output directory " + dir.string());
  }
}

void require_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw DataError("missing file " + path.string());
}

template <typename T>
void write_depth(const PipelineConfig& cfg, const fs::path& path,
                 const DepthDistribution<T>& dist) {
  if (cfg.activation == DepthActivation::kNone) {
    write_tnsr(path, dist.values);
    return;
  }
  Tensor<T> logits = dist.values;
  for (auto& v : logits.data()) {
    v = static_cast<T>(cfg.logit_scale * (2.0 * static_cast<double>(v) - 1.0));
  }
  write_tnsr(path, logits);
}

template <typename T>
void synth_depth(const PipelineConfig& cfg, const SyntheticScene& scene,
                 const std::vector<CameraModel>& cams, const fs::path& out_dir) {
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const auto dist = render_depth_distribution<T>(scene, cams[i], cfg.bins,
                                                   cfg.render_mode, cfg.render_decay);
    write_depth(cfg, out_dir / scene_files::depth(i), dist);
  }
}

}  // namespace

template <typename T>
SceneData<T> load_scene_dir(const PipelineConfig& cfg, const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("scene directory not found: " + dir.string());
  for (const char* f : {scene_files::kRig, scene_files::kLabels, scene_files::kMask}) {
    require_file(dir / f);
  }
  SceneData<T> s;
  try {
    s.rig = load_rig(dir / scene_files::kRig);
  } catch (const ConfigError& e) {
    throw DataError(std::string("scene rig: ") + e.what());
  }
  const GridSpec& g = s.rig.grid;
  const Shape grid_shape{g.nx, g.ny, g.nz};

  OccGrid labels = read_occg(dir / scene_files::kLabels);
  if (labels.labels.shape() != grid_shape) {
    throw DataError("labels shape " + shape_str(labels.labels.shape()) +
                    " does not match the rig grid " + shape_str(grid_shape));
  }
  if (labels.num_classes != cfg.num_classes) {
    throw DataError("labels have " + std::to_string(labels.num_classes) +
                    " classes, config expects " + std::to_string(cfg.num_classes));
  }
  s.labels = {std::move(labels.labels), labels.num_classes};
  s.mask = read_mask(dir / scene_files::kMask);
  if (s.mask.visible.shape() != grid_shape) {
    throw DataError("mask shape does not match the rig grid");
  }

  s.inputs.grid = g;
  s.inputs.cameras = s.rig.cameras;
  for (std::size_t i = 0; i < s.rig.cameras.size(); ++i) {
    const fs::path path = dir / scene_files::depth(i);
    require_file(path);
    Tensor<T> values = read_tnsr_as<T>(path);
    const auto& cam = s.rig.cameras[i];
    if (values.shape() != Shape{cfg.bins.n_bins, cam.H, cam.W}) {
      throw DataError(path.string() + " has shape " + shape_str(values.shape()) +
                      ", expected " + shape_str({cfg.bins.n_bins, cam.H, cam.W}));
    }
    if (!all_finite(values)) throw DataError(path.string() + " holds non-finite values");
    if (cfg.activation == DepthActivation::kNone) {
      s.inputs.depth.push_back({std::move(values), cfg.bins, DepthActivation::kNone});
    } else {
      s.inputs.depth.push_back(activate_depth(values, cfg.activation, cfg.bins));
    }
  }

  const fs::path bev = dir / scene_files::kBevFeatures;
  if (fs::exists(bev)) {
    s.inputs.bev_features = read_tnsr_as<T>(bev);
    if (s.inputs.bev_features.shape() != Shape{cfg.channels, g.nx, g.ny}) {
      throw DataError("bev_features.tnsr has shape " +
                      shape_str(s.inputs.bev_features.shape()) + ", expected " +
                      shape_str({cfg.channels, g.nx, g.ny}));
    }
  } else {
    s.inputs.bev_features = Tensor<T>({cfg.channels, g.nx, g.ny});
  }
  return s;
}

SynthSummary cmd_synth(const PipelineConfig& cfg, const fs::path& out_dir) {
  make_dir(out_dir);
  const Rig rig = cfg.rig();
  const SyntheticScene scene = generate_scene(rig.grid, cfg.n_boxes, cfg.seed);
  const VisibilityMask mask = compute_visibility(scene, rig.cameras);

  write_file(out_dir / scene_files::kScene, scene_to_json(scene));
  write_file(out_dir / scene_files::kRig, rig_to_json(rig));
  write_occg(out_dir / scene_files::kLabels, scene.labels.labels,
             static_cast<std::uint32_t>(scene.labels.num_classes));
  write_mask(out_dir / scene_files::kMask, mask);
  if (cfg.precision == Precision::kF64) {
    synth_depth<double>(cfg, scene, rig.cameras, out_dir);
  } else {
    synth_depth<float>(cfg, scene, rig.cameras, out_dir);
  }

  SynthSummary sum;
  sum.cameras = rig.cameras.size();
  sum.visible_voxels = mask.count();
  for (std::uint8_t v : scene.labels.labels.data()) sum.occupied_voxels += v != kFreeClass;
  return sum;
}

template <typename T>
PipelineParams<T> initial_params(const PipelineConfig& cfg, const GridSpec& grid) {
  const auto dims = ModelDims::from_config(cfg, grid);
  Rng rng(cfg.seed);
  auto params = cfg.zero_init ? PipelineParams<T>::zeros(dims)
                              : PipelineParams<T>::uniform(dims, rng);
  if (cfg.params_dir) params.load(*cfg.params_dir);
  return params;
}

namespace {

template <typename T>
PipelineRun run_pipeline(const PipelineConfig& cfg, const fs::path& scene_dir) {
  const auto scene = load_scene_dir<T>(cfg, scene_dir);
  const auto params = initial_params<T>(cfg, scene.rig.grid);
  const auto state = pipeline_forward(scene.inputs, params, ModelOptions::from_config(cfg));
  if (!all_finite(state.logits)) throw NumericalError("pipeline produced non-finite logits");
  Labels pred = argmax_labels(state.logits);
  EvalReport report = evaluate(pred, scene.labels.labels, scene.mask, cfg.num_classes);
  return {std::move(pred), std::move(report)};
}

template <typename T>
FitTrace run_fit(const PipelineConfig& cfg, const fs::path& scene_dir, std::size_t steps,
                 double lr, const fs::path& out_params) {
  const auto scene = load_scene_dir<T>(cfg, scene_dir);
  auto params = initial_params<T>(cfg, scene.rig.grid);
  make_dir(out_params);
  const FitTrace trace = fit(scene.inputs, params, ModelOptions::from_config(cfg),
                             scene.labels, scene.mask, steps, lr);
  params.save(out_params);
  json doc;
  doc["steps"] = steps;
  doc["lr"] = lr;
  doc["loss"] = trace.loss;
  write_file(out_params / "loss_trace.json", doc.dump(2));
  return trace;
}

}  // namespace

PipelineRun cmd_pipeline(const PipelineConfig& cfg, const fs::path& scene_dir,
                         const fs::path& out_path) {
  PipelineRun run = cfg.precision == Precision::kF64 ? run_pipeline<double>(cfg, scene_dir)
                                                     : run_pipeline<float>(cfg, scene_dir);
  if (out_path.has_parent_path()) make_dir(out_path.parent_path());
  write_occg(out_path, run.prediction, static_cast<std::uint32_t>(cfg.num_classes));
  fs::path report_path = out_path;
  report_path.replace_extension(".json");
  write_file(report_path, run.report.to_json());
  return run;
}

FitTrace cmd_fit(const PipelineConfig& cfg, const fs::path& scene_dir, std::size_t steps,
                 double lr, const fs::path& out_params) {
  if (steps < 1) throw ConfigError("fit needs at least one step");
  if (!(lr >= 0.0)) throw ConfigError("fit lr must be non-negative");
  return cfg.precision == Precision::kF64
             ? run_fit<double>(cfg, scene_dir, steps, lr, out_params)
             : run_fit<float>(cfg, scene_dir, steps, lr, out_params);
}

BenchResult cmd_bench(const PipelineConfig& cfg, BenchMode mode, std::size_t repeats) {
  return run_bench(cfg, mode, repeats);
}

namespace {

SceneBundle<float> load_bundle(const fs::path& dir) {
  require_file(dir / scene_files::kLabels);
  require_file(dir / scene_files::kMask);
  SceneBundle<float> b;
  OccGrid labels = read_occg(dir / scene_files::kLabels);
  b.labels = {std::move(labels.labels), labels.num_classes};
  b.mask = read_mask(dir / scene_files::kMask);
  const Shape& s = b.labels.labels.shape();
  if (b.mask.visible.shape() != s) throw DataError("mask shape does not match labels");
  const fs::path bev = dir / scene_files::kBevFeatures;
  if (fs::exists(bev)) {
    b.features = read_tnsr_as<float>(bev);
    if (b.features.rank() != 3 || b.features.dim(1) != s[0] || b.features.dim(2) != s[1]) {
      throw DataError("bev_features.tnsr does not match the label grid");
    }
  } else {
    b.features = Tensor<float>({0, s[0], s[1]});
  }
  return b;
}

}  // namespace

AugmentSummary cmd_augment(const PipelineConfig& cfg, const std::vector<fs::path>& scene_dirs,
                           const fs::path& out_dir) {
  if (scene_dirs.empty()) throw ConfigError("augment needs at least one scene directory");
  std::vector<SceneBundle<float>> bundles;
  for (const auto& d : scene_dirs) bundles.push_back(load_bundle(d));

  AugmentSummary sum;
  SceneBundle<float> out;
  {
    auto mixed = cutmix<float>(bundles, cfg.cutmix);
    sum.regions = mixed.regions;
    sum.mixed = mixed.mixed;
    out = std::move(mixed.bundle);
  }
  if (cfg.flip_axis) {
    // Same draw as bev_flip, kept here so the summary can record it.
    Rng rng(cfg.seed);
    sum.flipped = rng.bernoulli(cfg.flip_probability);
    if (sum.flipped) out = flip_bundle(out, *cfg.flip_axis);
  }

  make_dir(out_dir);
  write_occg(out_dir / scene_files::kLabels, out.labels.labels,
             static_cast<std::uint32_t>(out.labels.num_classes));
  write_mask(out_dir / scene_files::kMask, out.mask);
  if (out.features.dim(0) > 0) write_tnsr(out_dir / scene_files::kBevFeatures, out.features);
  if (fs::exists(scene_dirs.front() / scene_files::kRig)) {
    fs::copy_file(scene_dirs.front() / scene_files::kRig, out_dir / scene_files::kRig,
                  fs::copy_options::overwrite_existing);
  }

  json doc;
  doc["mixed"] = sum.mixed;
  doc["flipped"] = sum.flipped;
  doc["sources"] = json::array();
  for (const auto& d : scene_dirs) doc["sources"].push_back(d.string());
  doc["regions"] = json::array();
  for (const auto& r : sum.regions) {
    doc["regions"].push_back({{"x", {r.x0, r.x1}}, {"y", {r.y0, r.y1}}, {"donor", r.donor}});
  }
  write_file(out_dir / "augment.json", doc.dump(2));
  return sum;
}

EvalReport cmd_eval(const fs::path& pred, const fs::path& truth, const fs::path& mask,
                    const std::optional<fs::path>& out_json) {
  const OccGrid p = read_occg(pred);
  const OccGrid t = read_occg(truth);
  const VisibilityMask m = read_mask(mask);
  if (p.num_classes != t.num_classes) {
    throw DataError("prediction and truth disagree on the class count");
  }
  const std::size_t free =
      t.num_classes == kNumClasses ? kFreeClass : static_cast<std::size_t>(t.num_classes - 1);
  EvalReport report = evaluate(p.labels, t.labels, m, t.num_classes, free);
  if (out_json) write_file(*out_json, report.to_json());
  return report;
}

void cmd_dump_slice(const fs::path& grid_path, const std::string& view,
                    const fs::path& out_image) {
  const OccGrid g = read_occg(grid_path);
  std::optional<std::size_t> z;
  if (view != "top") {
    std::size_t used = 0;
    long long v = -1;
    try {
      v = std::stoll(view, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != view.size() || view.empty()) {
      throw ConfigError("view must be 'top' or a z index, got '" + view + "'");
    }
    if (v < 0) throw DataError("z index " + view + " out of range");
    z = static_cast<std::size_t>(v);
  }
  const std::uint8_t free = g.num_classes == kNumClasses
                                ? kFreeClass
                                : static_cast<std::uint8_t>(g.num_classes - 1);
  write_file(out_image, encode_ppm(bev_slice(g.labels, z, free)));
}

template SceneData<float> load_scene_dir(const PipelineConfig&, const fs::path&);
template SceneData<double> load_scene_dir(const PipelineConfig&, const fs::path&);
template PipelineParams<float> initial_params(const PipelineConfig&, const GridSpec&);
template PipelineParams<double> initial_params(const PipelineConfig&, const GridSpec&);

}  // namespace tpvocc
