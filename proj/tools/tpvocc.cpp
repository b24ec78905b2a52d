// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

// tpvocc command-line entry point.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 data error
// (missing/corrupt files, shape mismatches), 4 numerical failure.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "tpvocc/commands.hpp"
#include "tpvocc/io.hpp"
#include "tpvocc/parallel.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::string out;
  int workers = 0;
};

tpvocc::PipelineConfig load_config(const Globals& g) {
  tpvocc::PipelineConfig cfg =
      g.config.empty() ? tpvocc::PipelineConfig{} : tpvocc::PipelineConfig::load(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (g.deterministic) cfg.deterministic = true;
  if (g.workers > 0) cfg.workers = g.workers;
  if (cfg.workers > 0) tpvocc::set_num_workers(cfg.workers);
  return cfg;
}

std::string require_out(const Globals& g, const char* what) {
  if (g.out.empty()) throw tpvocc::ConfigError(std::string("--out ") + what + " is required");
  return g.out;
}

void print(const json& doc) { std::cout << doc.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tri-perspective occupancy toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "pipeline config JSON")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "override the config seed");
  app.add_flag("--deterministic", g.deterministic,
               "fixed reduction order (always the case; kept for scripts)");
  app.add_option("--out", g.out, "output path");
  app.add_option("--workers", g.workers, "worker threads (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);

  auto* synth = app.add_subcommand("synth", "generate a synthetic scene directory");

  std::string scene_dir;
  auto* pipeline = app.add_subcommand("pipeline", "run the pipeline and evaluate");
  pipeline->add_option("--scene", scene_dir, "scene directory")->required();

  std::size_t steps = 0;
  double lr = -1.0;
  auto* fit = app.add_subcommand("fit", "gradient descent on one scene");
  fit->add_option("--scene", scene_dir, "scene directory")->required();
  fit->add_option("--steps", steps, "steps (default from config)");
  fit->add_option("--lr", lr, "learning rate (default from config)");

  std::string mode = "lti";
  std::size_t repeats = 0;
  auto* bench = app.add_subcommand("bench", "latency microbenchmark");
  bench->add_option("--mode", mode, "lti | conv3d_ref | gss");
  bench->add_option("--repeats", repeats, "timed repeats (default from config)");

  std::vector<std::string> scenes;
  auto* augment = app.add_subcommand("augment", "BEV-CutMix and flip over scene directories");
  augment->add_option("--scene", scenes, "scene directories; the first is the base")
      ->required();

  std::string pred, truth, mask;
  auto* eval = app.add_subcommand("eval", "masked mIoU of a prediction");
  eval->add_option("--pred", pred, "predicted OCCG")->required();
  eval->add_option("--truth", truth, "ground-truth OCCG")->required();
  eval->add_option("--mask", mask, "visibility mask OCCG")->required();

  std::string grid, view = "top";
  auto* dump = app.add_subcommand("dump-slice", "write a BEV slice as a PPM image");
  dump->add_option("--grid", grid, "OCCG label grid")->required();
  dump->add_option("--view", view, "'top' or a z index");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (synth->parsed()) {
      const auto cfg = load_config(g);
      const auto s = tpvocc::cmd_synth(cfg, require_out(g, "DIR"));
      print({{"cameras", s.cameras},
             {"visible_voxels", s.visible_voxels},
             {"occupied_voxels", s.occupied_voxels}});
    } else if (pipeline->parsed()) {
      const auto cfg = load_config(g);
      const auto run = tpvocc::cmd_pipeline(cfg, scene_dir, require_out(g, "FILE.occg"));
      std::cout << run.report.to_json() << "\n";
    } else if (fit->parsed()) {
      const auto cfg = load_config(g);
      const auto trace = tpvocc::cmd_fit(cfg, scene_dir, steps ? steps : cfg.fit_steps,
                                         lr >= 0 ? lr : cfg.fit_lr, require_out(g, "DIR"));
      print({{"initial_loss", trace.initial()},
             {"final_loss", trace.final()},
             {"steps", trace.loss.size() - 1}});
    } else if (bench->parsed()) {
      const auto cfg = load_config(g);
      const auto r = tpvocc::cmd_bench(cfg, tpvocc::parse_bench_mode(mode),
                                       repeats ? repeats : cfg.bench_repeats);
      if (!g.out.empty()) tpvocc::write_file(g.out, r.to_json());
      std::cout << r.to_json() << "\n";
    } else if (augment->parsed()) {
      const auto cfg = load_config(g);
      std::vector<fs::path> dirs(scenes.begin(), scenes.end());
      const auto s = tpvocc::cmd_augment(cfg, dirs, require_out(g, "DIR"));
      print({{"mixed", s.mixed}, {"flipped", s.flipped}, {"regions", s.regions.size()}});
    } else if (eval->parsed()) {
      std::optional<fs::path> out;
      if (!g.out.empty()) out = g.out;
      std::cout << tpvocc::cmd_eval(pred, truth, mask, out).to_json() << "\n";
    } else if (dump->parsed()) {
      tpvocc::cmd_dump_slice(grid, view, require_out(g, "FILE.ppm"));
    }
  } catch (const tpvocc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const tpvocc::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const tpvocc::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const tpvocc::ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
