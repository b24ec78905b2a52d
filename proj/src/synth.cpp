// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpvocc/synth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>

#include "tpvocc/random.hpp"

namespace tpvocc {

using nlohmann::json;

namespace {

// Crossings shorter than this (meters) are edge grazes, not occlusions.
constexpr double kGrazeLength = 1e-9;

}  // namespace

LabeledOccupancy rasterize(const GridSpec& spec, std::span<const Box> boxes,
                           const std::optional<GroundPlane>& ground,
                           std::size_t num_classes) {
  LabeledOccupancy occ{Labels(spec.shape(), kFreeClass), num_classes};
  if (ground) {
    for (std::size_t k = 0; k < spec.nz; ++k) {
      const double lower = spec.z_min + static_cast<double>(k) * spec.voxel_size;
      if (lower > ground->z) break;
      for (std::size_t i = 0; i < spec.nx; ++i)
        for (std::size_t j = 0; j < spec.ny; ++j)
          occ.labels[spec.flat(i, j, k)] = ground->cls;
    }
  }
  for (const Box& box : boxes) {
    for (std::size_t i = 0; i < spec.nx; ++i) {
      for (std::size_t j = 0; j < spec.ny; ++j) {
        for (std::size_t k = 0; k < spec.nz; ++k) {
          const Eigen::Vector3d c = spec.center(i, j, k);
          if ((c.array() >= box.lo.array()).all() &&
              (c.array() <= box.hi.array()).all()) {
            occ.labels[spec.flat(i, j, k)] = box.cls;
          }
        }
      }
    }
  }
  return occ;
}

SyntheticScene make_scene(const GridSpec& spec, std::vector<Box> boxes,
                          std::optional<GroundPlane> ground) {
  for (const Box& b : boxes) {
    if (!(b.lo.array() <= b.hi.array()).all()) {
      throw ConfigError("box corners are not ordered");
    }
    if (b.cls >= kNumClasses) throw ConfigError("box class out of range");
  }
  SyntheticScene scene;
  scene.spec = spec;
  scene.labels = rasterize(spec, boxes, ground);
  scene.boxes = std::move(boxes);
  scene.ground = ground;
  return scene;
}

SyntheticScene generate_scene(const GridSpec& spec, std::size_t n_boxes,
                              std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const GroundPlane ground{spec.z_min, kGroundClass};
  const std::size_t k0 = spec.nz > 1 ? 1 : 0;
  const std::size_t max_xy = std::max<std::size_t>(2, std::min(spec.nx, spec.ny) / 5);
  const std::size_t max_z = std::max<std::size_t>(1, (spec.nz - k0) / 2);
  // Central 2 x 2 pillars stay free.
  const std::size_t ci = spec.nx / 2, cj = spec.ny / 2;
  auto overlaps = [](std::size_t a0, std::size_t a1, std::size_t b0, std::size_t b1) {
    return a0 < b1 && b0 < a1;
  };

  std::vector<Box> boxes;
  for (std::size_t b = 0; b < n_boxes; ++b) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      const std::size_t sx = 1 + rng.index(std::min(max_xy, spec.nx));
      const std::size_t sy = 1 + rng.index(std::min(max_xy, spec.ny));
      const std::size_t sz = 1 + rng.index(max_z);
      const std::size_t i0 = rng.index(spec.nx - sx + 1);
      const std::size_t j0 = rng.index(spec.ny - sy + 1);
      const auto cls = static_cast<std::uint8_t>(1 + rng.index(10));
      if (overlaps(i0, i0 + sx, ci ? ci - 1 : 0, ci + 1) &&
          overlaps(j0, j0 + sy, cj ? cj - 1 : 0, cj + 1)) {
        continue;
      }
      const double v = spec.voxel_size;
      Box box;
      box.lo = {spec.x_min + static_cast<double>(i0) * v,
                spec.y_min + static_cast<double>(j0) * v,
                spec.z_min + static_cast<double>(k0) * v};
      box.hi = box.lo + Eigen::Vector3d(static_cast<double>(sx) * v,
                                        static_cast<double>(sy) * v,
                                        static_cast<double>(std::min(sz, spec.nz - k0)) * v);
      box.cls = cls;
      boxes.push_back(box);
      break;
    }
  }
  return make_scene(spec, std::move(boxes), ground);
}

void traverse_voxels(
    const GridSpec& spec, const Eigen::Vector3d& origin,
    const Eigen::Vector3d& dir, double t_max,
    const std::function<bool(std::size_t, std::size_t, std::size_t, double,
                             double)>& visit) {
  const double lo[3] = {spec.x_min, spec.y_min, spec.z_min};
  const double hi[3] = {spec.x_max, spec.y_max, spec.z_max};
  const std::ptrdiff_t n[3] = {static_cast<std::ptrdiff_t>(spec.nx),
                               static_cast<std::ptrdiff_t>(spec.ny),
                               static_cast<std::ptrdiff_t>(spec.nz)};
  const double v = spec.voxel_size;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Clip to the grid box (slab method).
  double t0 = 0.0, t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < lo[a] || origin[a] > hi[a]) return;
      continue;
    }
    double ta = (lo[a] - origin[a]) / dir[a];
    double tb = (hi[a] - origin[a]) / dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t0 < t1)) return;

  std::ptrdiff_t idx[3];
  std::ptrdiff_t step[3];
  double t_next[3], t_delta[3];
  for (int a = 0; a < 3; ++a) {
    // An entry point exactly on a face belongs to the voxel the ray moves
    // into.
    const double f = (origin[a] + t0 * dir[a] - lo[a]) / v;
    auto cell = static_cast<std::ptrdiff_t>(std::floor(f));
    if (dir[a] < 0.0 && f == std::floor(f)) --cell;
    idx[a] = std::clamp<std::ptrdiff_t>(cell, 0, n[a] - 1);
    if (dir[a] > 0.0) {
      step[a] = 1;
      t_next[a] = (lo[a] + static_cast<double>(idx[a] + 1) * v - origin[a]) / dir[a];
      t_delta[a] = v / dir[a];
    } else if (dir[a] < 0.0) {
      step[a] = -1;
      t_next[a] = (lo[a] + static_cast<double>(idx[a]) * v - origin[a]) / dir[a];
      t_delta[a] = -v / dir[a];
    } else {
      step[a] = 0;
      t_next[a] = kInf;
      t_delta[a] = kInf;
    }
  }
  double t_cur = t0;
  while (true) {
    int axis = 0;
    if (t_next[1] < t_next[axis]) axis = 1;
    if (t_next[2] < t_next[axis]) axis = 2;
    const double t_exit = std::max(t_cur, std::min(t_next[axis], t1));
    if (!visit(static_cast<std::size_t>(idx[0]), static_cast<std::size_t>(idx[1]),
               static_cast<std::size_t>(idx[2]), t_cur, t_exit)) {
      return;
    }
    if (t_next[axis] >= t1) return;
    t_cur = t_exit;
    idx[axis] += step[axis];
    t_next[axis] += t_delta[axis];
    if (idx[axis] < 0 || idx[axis] >= n[axis]) return;
  }
}

RenderMode parse_render_mode(const std::string& name) {
  if (name == "onehot") return RenderMode::kOneHot;
  if (name == "sigmoid_like") return RenderMode::kSigmoidLike;
  throw ConfigError("unknown render mode '" + name + "'");
}

template <typename T>
DepthDistribution<T> render_depth_distribution(const SyntheticScene& scene,
                                               const CameraModel& cam,
                                               const DepthBins& bins,
                                               RenderMode mode, double decay) {
  bins.validate();
  const GridSpec& spec = scene.spec;
  const std::size_t D = bins.n_bins, H = cam.H, W = cam.W;
  DepthDistribution<T> dist{Tensor<T>({D, H, W}), bins, DepthActivation::kNone};
  const Eigen::Vector3d origin = cam.center();
  const Eigen::Matrix3d k_inv = cam.K.inverse();
  if (!k_inv.allFinite()) throw ConfigError("degenerate camera intrinsics");

  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t w = 0; w < W; ++w) {
      // Camera-frame direction with unit z, so the ray parameter is depth.
      const Eigen::Vector3d dir_cam =
          k_inv * Eigen::Vector3d(static_cast<double>(w), static_cast<double>(h), 1.0);
      const Eigen::Vector3d dir = cam.R.transpose() * dir_cam;
      if (!dir.allFinite() || dir.norm() == 0.0) {
        throw ConfigError("degenerate ray direction");
      }
      const double len = dir.norm();
      std::optional<double> hit;
      traverse_voxels(spec, origin, dir, std::numeric_limits<double>::max(),
                      [&](std::size_t i, std::size_t j, std::size_t k,
                          double t_in, double t_out) {
                        if ((t_out - t_in) * len <= kGrazeLength) return true;
                        if (scene.labels.labels[spec.flat(i, j, k)] == kFreeClass) {
                          return true;
                        }
                        hit = t_in;
                        return false;
                      });
      if (!hit) continue;
      const double pos = (*hit - bins.d_min) / bins.bin_size;
      const auto bin = static_cast<std::ptrdiff_t>(std::floor(pos + 1e-9));
      if (bin < 0 || bin >= static_cast<std::ptrdiff_t>(D)) continue;
      if (mode == RenderMode::kOneHot) {
        dist.values(static_cast<std::size_t>(bin), h, w) = T(1);
      } else {
        double weight = 1.0;
        for (auto b = static_cast<std::size_t>(bin); b < D; ++b) {
          dist.values(b, h, w) = static_cast<T>(weight);
          weight *= decay;
        }
      }
    }
  }
  return dist;
}

VisibilityMask compute_visibility(const GridSpec& spec, const Labels& labels,
                                  std::span<const CameraModel> cams) {
  require_shape(labels.shape(), spec.shape(), "compute_visibility labels");
  VisibilityMask mask{Labels(spec.shape())};
  const auto n = static_cast<std::int64_t>(spec.num_voxels());
  const std::size_t nyz = spec.ny * spec.nz;
#pragma omp parallel for schedule(static)
  for (std::int64_t v = 0; v < n; ++v) {
    const auto flat = static_cast<std::size_t>(v);
    const std::size_t ti = flat / nyz, tj = (flat / spec.nz) % spec.ny,
                      tk = flat % spec.nz;
    const Eigen::Vector3d target = spec.center(ti, tj, tk);
    for (const CameraModel& cam : cams) {
      if (!project(cam, target).in_frustum) continue;
      const Eigen::Vector3d origin = cam.center();
      const Eigen::Vector3d dir = target - origin;
      const double len = dir.norm();
      bool blocked = false;
      traverse_voxels(spec, origin, dir, 1.0,
                      [&](std::size_t i, std::size_t j, std::size_t k,
                          double t_in, double t_out) {
                        if (i == ti && j == tj && k == tk) return false;
                        if ((t_out - t_in) * len <= kGrazeLength) return true;
                        if (labels[spec.flat(i, j, k)] != kFreeClass) {
                          blocked = true;
                          return false;
                        }
                        return true;
                      });
      if (!blocked) {
        mask.visible[flat] = 1;
        break;
      }
    }
  }
  return mask;
}

VisibilityMask compute_visibility(const SyntheticScene& scene,
                                  std::span<const CameraModel> cams) {
  return compute_visibility(scene.spec, scene.labels.labels, cams);
}

std::string scene_to_json(const SyntheticScene& scene) {
  const GridSpec& g = scene.spec;
  json doc;
  doc["grid"] = {{"x_min", g.x_min}, {"x_max", g.x_max},
                 {"y_min", g.y_min}, {"y_max", g.y_max},
                 {"z_min", g.z_min}, {"z_max", g.z_max},
                 {"voxel_size", g.voxel_size},
                 {"nx", g.nx}, {"ny", g.ny}, {"nz", g.nz}};
  doc["num_classes"] = scene.labels.num_classes;
  doc["free_class"] = kFreeClass;
  if (scene.ground) {
    doc["ground"] = {{"z", scene.ground->z}, {"class", scene.ground->cls}};
  } else {
    doc["ground"] = nullptr;
  }
  doc["boxes"] = json::array();
  for (const Box& b : scene.boxes) {
    doc["boxes"].push_back({{"min", {b.lo.x(), b.lo.y(), b.lo.z()}},
                            {"max", {b.hi.x(), b.hi.y(), b.hi.z()}},
                            {"class", b.cls}});
  }
  return doc.dump(2);
}

SyntheticScene scene_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    const json& g = doc.at("grid");
    GridSpec spec;
    spec.x_min = g.at("x_min");
    spec.x_max = g.at("x_max");
    spec.y_min = g.at("y_min");
    spec.y_max = g.at("y_max");
    spec.z_min = g.at("z_min");
    spec.z_max = g.at("z_max");
    spec.voxel_size = g.at("voxel_size");
    spec.nx = g.at("nx");
    spec.ny = g.at("ny");
    spec.nz = g.at("nz");
    spec.validate();
    std::optional<GroundPlane> ground;
    if (!doc.at("ground").is_null()) {
      ground = GroundPlane{doc["ground"].at("z"),
                           doc["ground"].at("class").get<std::uint8_t>()};
    }
    std::vector<Box> boxes;
    for (const json& b : doc.at("boxes")) {
      const auto lo = b.at("min").get<std::vector<double>>();
      const auto hi = b.at("max").get<std::vector<double>>();
      if (lo.size() != 3 || hi.size() != 3) throw DataError("box corners need 3 values");
      boxes.push_back({{lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]},
                       b.at("class").get<std::uint8_t>()});
    }
    return make_scene(spec, std::move(boxes), ground);
  } catch (const json::exception& e) {
    throw DataError(std::string("scene json: ") + e.what());
  }
}

template DepthDistribution<float> render_depth_distribution(
    const SyntheticScene&, const CameraModel&, const DepthBins&, RenderMode, double);
template DepthDistribution<double> render_depth_distribution(
    const SyntheticScene&, const CameraModel&, const DepthBins&, RenderMode, double);

}  // namespace tpvocc
