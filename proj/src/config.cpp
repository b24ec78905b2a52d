// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpvocc/config.hpp"

#include <json.hpp>

#include "tpvocc/io.hpp"

namespace tpvocc {

using nlohmann::json;

namespace {

template <typename V>
void read(const json& j, const char* key, V& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<V>();
}

}  // namespace

PipelineConfig PipelineConfig::parse(const std::string& json_text,
                                     const std::filesystem::path& base_dir) {
  PipelineConfig cfg;
  cfg.base_dir = base_dir;
  try {
    const json doc = json::parse(json_text);
    if (doc.contains("rig") && !doc["rig"].is_null()) {
      cfg.rig_path = base_dir / doc["rig"].get<std::string>();
    }
    if (doc.contains("grid")) {
      const json& g = doc["grid"];
      GridSpec s;
      s.x_min = g.at("x_min");
      s.x_max = g.at("x_max");
      s.y_min = g.at("y_min");
      s.y_max = g.at("y_max");
      s.z_min = g.at("z_min");
      s.z_max = g.at("z_max");
      s.voxel_size = g.at("voxel_size");
      s.nx = g.at("nx");
      s.ny = g.at("ny");
      s.nz = g.at("nz");
      cfg.grid = s;
    }
    if (doc.contains("ring")) {
      const json& r = doc["ring"];
      read(r, "count", cfg.ring.count);
      read(r, "x", cfg.ring.x);
      read(r, "y", cfg.ring.y);
      read(r, "height", cfg.ring.height);
      read(r, "focal", cfg.ring.focal);
      read(r, "H", cfg.ring.H);
      read(r, "W", cfg.ring.W);
    }
    read(doc, "channels", cfg.channels);
    read(doc, "kernel_size", cfg.kernel_size);
    read(doc, "conv_layers", cfg.conv_layers);
    read(doc, "bev_layers", cfg.bev_layers);
    read(doc, "num_classes", cfg.num_classes);
    if (doc.contains("depth")) {
      const json& d = doc["depth"];
      read(d, "d_min", cfg.bins.d_min);
      read(d, "bin_size", cfg.bins.bin_size);
      read(d, "n_bins", cfg.bins.n_bins);
      if (d.contains("activation")) cfg.activation = parse_activation(d["activation"]);
      if (d.contains("render")) cfg.render_mode = parse_render_mode(d["render"]);
      read(d, "decay", cfg.render_decay);
      read(d, "logit_scale", cfg.logit_scale);
    }
    if (doc.contains("sampling")) cfg.sampling = parse_sampling_mode(doc["sampling"]);
    read(doc, "mean_over_vanished", cfg.mean_over_vanished);
    if (doc.contains("cutmix")) {
      const json& c = doc["cutmix"];
      read(c, "cut_x", cfg.cutmix.cut_x);
      read(c, "cut_y", cfg.cutmix.cut_y);
      read(c, "mix_ratio", cfg.cutmix.mix_ratio);
      read(c, "seed", cfg.cutmix.seed);
      read(c, "random_position", cfg.cutmix.random_position);
    }
    if (doc.contains("flip") && !doc["flip"].is_null()) {
      const std::string axis = doc["flip"].value("axis", "x");
      if (axis == "x") {
        cfg.flip_axis = FlipAxis::kX;
      } else if (axis == "y") {
        cfg.flip_axis = FlipAxis::kY;
      } else {
        throw ConfigError("flip axis must be 'x' or 'y'");
      }
      read(doc["flip"], "probability", cfg.flip_probability);
    }
    if (doc.contains("scene")) read(doc["scene"], "n_boxes", cfg.n_boxes);
    read(doc, "seed", cfg.seed);
    if (doc.contains("precision")) {
      const std::string p = doc["precision"];
      if (p == "f32") {
        cfg.precision = Precision::kF32;
      } else if (p == "f64") {
        cfg.precision = Precision::kF64;
      } else {
        throw ConfigError("precision must be 'f32' or 'f64'");
      }
    }
    read(doc, "deterministic", cfg.deterministic);
    if (doc.contains("init")) {
      const std::string init = doc["init"];
      if (init != "uniform" && init != "zero") {
        throw ConfigError("init must be 'uniform' or 'zero'");
      }
      cfg.zero_init = init == "zero";
    }
    if (doc.contains("params") && !doc["params"].is_null()) {
      cfg.params_dir = base_dir / doc["params"].get<std::string>();
    }
    if (doc.contains("fit")) {
      read(doc["fit"], "steps", cfg.fit_steps);
      read(doc["fit"], "lr", cfg.fit_lr);
    }
    if (doc.contains("bench")) read(doc["bench"], "repeats", cfg.bench_repeats);
    read(doc, "workers", cfg.workers);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config json: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError&) {
    throw ConfigError("cannot read config " + path.string());
  }
  return parse(text, path.parent_path().empty() ? "." : path.parent_path());
}

void PipelineConfig::validate() const {
  if (rig_path && !std::filesystem::exists(*rig_path)) {
    throw ConfigError("rig file does not exist: " + rig_path->string());
  }
  if (params_dir && !std::filesystem::is_directory(*params_dir)) {
    throw ConfigError("params directory does not exist: " + params_dir->string());
  }
  if (!rig_path) grid.validate();
  if (channels < 1) throw ConfigError("channels must be at least 1");
  if (kernel_size != 1 && kernel_size != 3) throw ConfigError("kernel_size must be 1 or 3");
  if (conv_layers < 1 || conv_layers > 2) throw ConfigError("conv_layers must be 1 or 2");
  if (bev_layers > 3) throw ConfigError("bev_layers must be at most 3");
  if (num_classes < 2 || num_classes > 255 || num_classes <= kFreeClass) {
    throw ConfigError("num_classes must be in [18, 255]");
  }
  bins.validate();
  cutmix.validate();
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
    throw ConfigError("flip probability must be in [0, 1]");
  }
  if (ring.count < 1) throw ConfigError("ring needs at least one camera");
  if (bench_repeats < 3) throw ConfigError("bench repeats must be at least 3");
  if (!(fit_lr >= 0.0)) throw ConfigError("fit lr must be non-negative");
}

Rig PipelineConfig::rig() const {
  if (rig_path) return load_rig(*rig_path);
  Rig rig;
  rig.grid = grid;
  rig.cameras = make_ring_rig({ring.x, ring.y, ring.height}, ring.count,
                              ring.focal, ring.H, ring.W);
  for (const auto& cam : rig.cameras) cam.validate();
  return rig;
}

std::string PipelineConfig::to_json() const {
  json doc;
  if (rig_path) doc["rig"] = rig_path->string();
  doc["grid"] = {{"x_min", grid.x_min}, {"x_max", grid.x_max},
                 {"y_min", grid.y_min}, {"y_max", grid.y_max},
                 {"z_min", grid.z_min}, {"z_max", grid.z_max},
                 {"voxel_size", grid.voxel_size},
                 {"nx", grid.nx}, {"ny", grid.ny}, {"nz", grid.nz}};
  doc["ring"] = {{"count", ring.count}, {"x", ring.x}, {"y", ring.y},
                 {"height", ring.height}, {"focal", ring.focal},
                 {"H", ring.H}, {"W", ring.W}};
  doc["channels"] = channels;
  doc["kernel_size"] = kernel_size;
  doc["conv_layers"] = conv_layers;
  doc["bev_layers"] = bev_layers;
  doc["num_classes"] = num_classes;
  doc["depth"] = {{"d_min", bins.d_min},
                  {"bin_size", bins.bin_size},
                  {"n_bins", bins.n_bins},
                  {"activation", to_string(activation)},
                  {"render", render_mode == RenderMode::kOneHot ? "onehot" : "sigmoid_like"},
                  {"decay", render_decay},
                  {"logit_scale", logit_scale}};
  doc["sampling"] = sampling == SamplingMode::kTrilinear ? "trilinear" : "nearest_depth";
  doc["mean_over_vanished"] = mean_over_vanished;
  doc["cutmix"] = {{"cut_x", cutmix.cut_x},
                   {"cut_y", cutmix.cut_y},
                   {"mix_ratio", cutmix.mix_ratio},
                   {"seed", cutmix.seed},
                   {"random_position", cutmix.random_position}};
  if (flip_axis) {
    doc["flip"] = {{"axis", *flip_axis == FlipAxis::kX ? "x" : "y"},
                   {"probability", flip_probability}};
  }
  doc["scene"] = {{"n_boxes", n_boxes}};
  doc["seed"] = seed;
  doc["precision"] = precision == Precision::kF32 ? "f32" : "f64";
  doc["deterministic"] = deterministic;
  doc["init"] = zero_init ? "zero" : "uniform";
  if (params_dir) doc["params"] = params_dir->string();
  doc["fit"] = {{"steps", fit_steps}, {"lr", fit_lr}};
  doc["bench"] = {{"repeats", bench_repeats}};
  doc["workers"] = workers;
  return doc.dump(2);
}

}  // namespace tpvocc
