// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <json.hpp>

#include "support.hpp"
#include "tpvocc/commands.hpp"
#include "tpvocc/io.hpp"
#include "tpvocc/parallel.hpp"
#include "tpvocc/synth.hpp"

namespace tpvocc {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) { return read_file(p); }

std::vector<std::string> dir_bytes(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<std::string> out;
  for (const auto& f : files) out.push_back(f.filename().string() + ":" + slurp(f));
  return out;
}

PipelineConfig small_config(const std::string& extra = "") {
  return PipelineConfig::parse("{\"channels\": 4" + extra + "}");
}

TEST(Synth, ByteIdenticalAcrossRuns) {
  const auto cfg = small_config();
  const auto a = testing::temp_dir("synth_a"), b = testing::temp_dir("synth_b");
  const auto sa = cmd_synth(cfg, a);
  cmd_synth(cfg, b);
  EXPECT_EQ(dir_bytes(a), dir_bytes(b));
  EXPECT_EQ(sa.cameras, 2u);
  EXPECT_GT(sa.visible_voxels, 0u);
  EXPECT_TRUE(fs::exists(a / scene_files::depth(1)));
}

TEST(Synth, NoBoxesGivesGroundAndFreeOnly) {
  const auto cfg = small_config(", \"scene\": {\"n_boxes\": 0}");
  const auto dir = testing::temp_dir("synth_empty");
  const auto sum = cmd_synth(cfg, dir);
  const auto g = cfg.grid;
  EXPECT_EQ(sum.occupied_voxels, g.nx * g.ny);
  const auto labels = read_occg(dir / scene_files::kLabels).labels;
  for (std::size_t i = 0; i < g.nx; ++i)
    for (std::size_t j = 0; j < g.ny; ++j)
      for (std::size_t k = 0; k < g.nz; ++k)
        EXPECT_EQ(labels(i, j, k), k == 0 ? kGroundClass : kFreeClass);
}

TEST(Synth, StoredDistributionsMatchARecomputedRender) {
  const auto cfg = small_config();
  const auto dir = testing::temp_dir("synth_render");
  cmd_synth(cfg, dir);
  const auto scene = scene_from_json(slurp(dir / scene_files::kScene));
  const auto rig = cfg.rig();
  for (std::size_t c = 0; c < rig.cameras.size(); ++c) {
    const auto want = render_depth_distribution<float>(scene, rig.cameras[c], cfg.bins,
                                                       cfg.render_mode, cfg.render_decay);
    EXPECT_EQ(read_tnsr_as<float>(dir / scene_files::depth(c)), want.values);
  }
  const auto mask = read_mask(dir / scene_files::kMask);
  EXPECT_EQ(mask.visible, compute_visibility(scene, rig.cameras).visible);
}

TEST(Synth, ActivationStoresLogitsThatRecoverTheRender) {
  const auto cfg = small_config(", \"depth\": {\"activation\": \"sigmoid\"}");
  const auto dir = testing::temp_dir("synth_logits");
  cmd_synth(cfg, dir);
  const auto data = load_scene_dir<double>(cfg, dir);
  const auto scene = scene_from_json(slurp(dir / scene_files::kScene));
  const auto want =
      render_depth_distribution<double>(scene, data.rig.cameras[0], cfg.bins, cfg.render_mode);
  const auto& got = data.inputs.depth[0].values;
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_NEAR(got[i], want.values[i], 1e-3);
  }
}

TEST(PipelineCommand, ZeroInitPredictsClassZero) {
  const auto scene = testing::temp_dir("pipe_zero_scene");
  const auto cfg = small_config(", \"init\": \"zero\"");
  cmd_synth(cfg, scene);
  const auto out = testing::temp_dir("pipe_zero_out") / "pred.occg";
  const auto run = cmd_pipeline(cfg, scene, out);
  for (auto v : run.prediction.data()) EXPECT_EQ(v, 0);
  EXPECT_EQ(read_occg(out).labels, run.prediction);
  const auto report = nlohmann::json::parse(slurp(fs::path(out).replace_extension(".json")));
  EXPECT_TRUE(report.contains("miou"));
}

TEST(PipelineCommand, DeterministicAcrossRunsAndWorkers) {
  const auto scene = testing::temp_dir("pipe_det_scene");
  const auto cfg = small_config();
  cmd_synth(cfg, scene);
  const auto out = testing::temp_dir("pipe_det_out");
  std::vector<std::string> bytes;
  for (int workers : {1, 4, 1}) {
    set_num_workers(workers);
    cmd_pipeline(cfg, scene, out / "pred.occg");
    bytes.push_back(slurp(out / "pred.occg") + slurp(out / "pred.json"));
  }
  set_num_workers(0);
  EXPECT_EQ(bytes[0], bytes[1]);
  EXPECT_EQ(bytes[0], bytes[2]);
}

TEST(PipelineCommand, UsesSavedParams) {
  const auto scene = testing::temp_dir("pipe_params_scene");
  const auto cfg = small_config();
  cmd_synth(cfg, scene);
  const auto params = testing::temp_dir("pipe_params");
  const auto trace = cmd_fit(cfg, scene, 3, 0.05, params);
  EXPECT_EQ(trace.loss.size(), 4u);
  const auto doc = nlohmann::json::parse(slurp(params / "loss_trace.json"));
  EXPECT_EQ(doc["loss"].size(), 4u);

  auto with = cfg;
  with.params_dir = params;
  const auto out = testing::temp_dir("pipe_params_out");
  const auto a = cmd_pipeline(with, scene, out / "a.occg");
  auto p = initial_params<float>(with, cfg.grid);
  auto fresh = initial_params<float>(cfg, cfg.grid);
  bool differs = false;
  std::vector<Tensor<float>> loaded;
  p.for_each([&](const std::string&, const Conv2dParams<float>& c) { loaded.push_back(c.weight); });
  std::size_t i = 0;
  fresh.for_each([&](const std::string&, const Conv2dParams<float>& c) {
    differs |= !(c.weight == loaded[i++]);
  });
  EXPECT_TRUE(differs);
  EXPECT_EQ(a.prediction.shape(), (Shape{cfg.grid.nx, cfg.grid.ny, cfg.grid.nz}));
  EXPECT_THROW(cmd_fit(cfg, scene, 0, 0.1, params), ConfigError);
  EXPECT_THROW(cmd_fit(cfg, scene, 1, -1.0, params), ConfigError);
}

TEST(AugmentCommand, MixesAndRecordsRegions) {
  auto cfg = small_config(", \"cutmix\": {\"cut_x\": true, \"cut_y\": true, \"seed\": 3}");
  std::vector<fs::path> dirs;
  for (std::uint64_t s = 0; s < 3; ++s) {
    auto c = cfg;
    c.seed = 10 + s;
    dirs.push_back(testing::temp_dir("aug_in_" + std::to_string(s)));
    cmd_synth(c, dirs.back());
  }
  const auto out = testing::temp_dir("aug_out");
  const auto sum = cmd_augment(cfg, dirs, out);
  EXPECT_TRUE(sum.mixed);
  ASSERT_EQ(sum.regions.size(), 4u);
  const auto labels = read_occg(out / scene_files::kLabels).labels;
  const auto mask = read_mask(out / scene_files::kMask);
  for (const auto& r : sum.regions) {
    const auto donor = read_occg(dirs[r.donor] / scene_files::kLabels).labels;
    const auto dmask = read_mask(dirs[r.donor] / scene_files::kMask);
    for (std::size_t i = r.x0; i < r.x1; ++i)
      for (std::size_t j = r.y0; j < r.y1; ++j)
        for (std::size_t k = 0; k < cfg.grid.nz; ++k) {
          EXPECT_EQ(labels(i, j, k), donor(i, j, k));
          EXPECT_EQ(mask.visible(i, j, k), dmask.visible(i, j, k));
        }
  }
  const auto doc = nlohmann::json::parse(slurp(out / "augment.json"));
  EXPECT_EQ(doc["regions"].size(), 4u);
  EXPECT_TRUE(fs::exists(out / scene_files::kRig));
  EXPECT_THROW(cmd_augment(cfg, {}, out), ConfigError);
}

TEST(AugmentCommand, FlipOnly) {
  auto cfg = small_config(", \"cutmix\": {\"cut_x\": false}, \"flip\": {\"axis\": \"y\", "
                          "\"probability\": 1.0}");
  const auto in = testing::temp_dir("flip_in");
  cmd_synth(cfg, in);
  const auto out = testing::temp_dir("flip_out");
  const auto sum = cmd_augment(cfg, {in}, out);
  EXPECT_TRUE(sum.flipped);
  EXPECT_EQ(read_occg(out / scene_files::kLabels).labels,
            flip_labels(read_occg(in / scene_files::kLabels).labels, FlipAxis::kY));
}

TEST(EvalCommand, PerfectAndFromFiles) {
  const auto dir = testing::temp_dir("eval_cmd");
  cmd_synth(small_config(), dir);
  const auto labels = dir / scene_files::kLabels;
  const auto r = cmd_eval(labels, labels, dir / scene_files::kMask, dir / "report.json");
  EXPECT_EQ(r.miou(), 1.0);
  EXPECT_DOUBLE_EQ(nlohmann::json::parse(slurp(dir / "report.json"))["miou"].get<double>(), 1.0);
  const auto& g = small_config().grid;
  write_occg(dir / "five.occg", Labels({g.nx, g.ny, g.nz}, 0), 5);
  EXPECT_THROW(cmd_eval(dir / "five.occg", labels, dir / scene_files::kMask, std::nullopt),
               DataError);
}

TEST(SceneDir, LoadErrors) {
  const auto cfg = small_config();
  EXPECT_THROW(load_scene_dir<float>(cfg, "/nonexistent/scene"), DataError);
  const auto dir = testing::temp_dir("scene_errors");
  cmd_synth(cfg, dir);
  EXPECT_NO_THROW(load_scene_dir<float>(cfg, dir));

  auto wrong_bins = cfg;
  wrong_bins.bins.n_bins = 10;
  EXPECT_THROW(load_scene_dir<float>(wrong_bins, dir), DataError);

  write_tnsr(dir / scene_files::kBevFeatures, Tensor<float>({3, 2, 2}));
  EXPECT_THROW(load_scene_dir<float>(cfg, dir), DataError);
  fs::remove(dir / scene_files::kBevFeatures);

  fs::remove(dir / scene_files::depth(1));
  EXPECT_THROW(load_scene_dir<float>(cfg, dir), DataError);
}

TEST(DumpSliceCommand, WritesPpmAndRejectsBadViews) {
  const auto dir = testing::temp_dir("dump_cmd");
  cmd_synth(small_config(), dir);
  cmd_dump_slice(dir / scene_files::kLabels, "top", dir / "top.ppm");
  EXPECT_EQ(slurp(dir / "top.ppm").substr(0, 3), "P6\n");
  cmd_dump_slice(dir / scene_files::kLabels, "0", dir / "z0.ppm");
  EXPECT_THROW(cmd_dump_slice(dir / scene_files::kLabels, "side", dir / "x.ppm"), ConfigError);
  EXPECT_THROW(cmd_dump_slice(dir / scene_files::kLabels, "99", dir / "x.ppm"), DataError);
}

}  // namespace
}  // namespace tpvocc
