// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpvocc/augment.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "tpvocc/random.hpp"

namespace tpvocc {

void CutMixConfig::validate() const {
  if (!(mix_ratio >= 0.0 && mix_ratio <= 1.0)) {
    throw ConfigError("cutmix mix_ratio must be in [0, 1]");
  }
}

template <typename T>
std::size_t CutMixResult<T>::donor_at(std::size_t i, std::size_t j) const {
  for (const MixRegion& r : regions) {
    if (i >= r.x0 && i < r.x1 && j >= r.y0 && j < r.y1) return r.donor;
  }
  throw ShapeError("pillar outside every mix region");
}

namespace {

template <typename T>
void check_bundle(const SceneBundle<T>& b, const Shape& grid) {
  require_shape(b.labels.labels.shape(), grid, "bundle labels");
  require_shape(b.mask.visible.shape(), grid, "bundle mask");
  if (b.features.rank() != 3 || b.features.dim(1) != grid[0] ||
      b.features.dim(2) != grid[1]) {
    throw ShapeError("bundle features must be C x nx x ny, got " +
                     shape_str(b.features.shape()));
  }
}

template <typename T>
void copy_region(const SceneBundle<T>& src, SceneBundle<T>& dst,
                 const MixRegion& r) {
  const std::size_t nx = dst.labels.labels.dim(0), ny = dst.labels.labels.dim(1),
                    nz = dst.labels.labels.dim(2);
  const std::size_t C = dst.features.dim(0);
  for (std::size_t i = r.x0; i < r.x1; ++i) {
    for (std::size_t j = r.y0; j < r.y1; ++j) {
      const std::size_t col = (i * ny + j) * nz;
      std::memcpy(dst.labels.labels.ptr() + col, src.labels.labels.ptr() + col, nz);
      std::memcpy(dst.mask.visible.ptr() + col, src.mask.visible.ptr() + col, nz);
      for (std::size_t c = 0; c < C; ++c) {
        dst.features[(c * nx + i) * ny + j] = src.features[(c * nx + i) * ny + j];
      }
    }
  }
}

}  // namespace

template <typename T>
CutMixResult<T> cutmix(std::span<const SceneBundle<T>> samples,
                       const CutMixConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw ShapeError("cutmix needs at least one sample");
  const Shape grid = samples[0].labels.labels.shape();
  if (grid.size() != 3) throw ShapeError("cutmix: labels must be nx x ny x nz");
  for (const auto& s : samples) {
    check_bundle(s, grid);
    require_shape(s.features.shape(), samples[0].features.shape(), "cutmix features");
  }
  const std::size_t nx = grid[0], ny = grid[1];

  Rng rng(cfg.seed);
  CutMixResult<T> result{samples[0], {{0, nx, 0, ny, 0}}, false};
  const bool trigger = rng.bernoulli(cfg.mix_ratio);
  if (!trigger || (!cfg.cut_x && !cfg.cut_y)) return result;
  if (samples.size() < 2) throw ShapeError("cutmix needs at least two samples to mix");

  std::size_t cut_x = nx / 2, cut_y = ny / 2;
  if (cfg.random_position) {
    if (nx > 1) cut_x = 1 + rng.index(nx - 1);
    if (ny > 1) cut_y = 1 + rng.index(ny - 1);
  }
  std::vector<std::pair<std::size_t, std::size_t>> xs{{0, nx}}, ys{{0, ny}};
  if (cfg.cut_x) xs = {{0, cut_x}, {cut_x, nx}};
  if (cfg.cut_y) ys = {{0, cut_y}, {cut_y, ny}};

  result.regions.clear();
  result.mixed = true;
  for (const auto& [x0, x1] : xs) {
    for (const auto& [y0, y1] : ys) {
      const MixRegion r{x0, x1, y0, y1, rng.index(samples.size())};
      copy_region(samples[r.donor], result.bundle, r);
      result.regions.push_back(r);
    }
  }
  return result;
}

Labels flip_labels(const Labels& labels, FlipAxis axis) {
  const std::size_t nx = labels.dim(0), ny = labels.dim(1), nz = labels.dim(2);
  Labels out(labels.shape());
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      const std::size_t si = axis == FlipAxis::kX ? nx - 1 - i : i;
      const std::size_t sj = axis == FlipAxis::kY ? ny - 1 - j : j;
      std::memcpy(out.ptr() + (i * ny + j) * nz, labels.ptr() + (si * ny + sj) * nz, nz);
    }
  }
  return out;
}

template <typename T>
SceneBundle<T> flip_bundle(const SceneBundle<T>& bundle, FlipAxis axis) {
  check_bundle(bundle, bundle.labels.labels.shape());
  SceneBundle<T> out = bundle;
  out.labels.labels = flip_labels(bundle.labels.labels, axis);
  out.mask.visible = flip_labels(bundle.mask.visible, axis);
  const std::size_t C = bundle.features.dim(0), nx = bundle.features.dim(1),
                    ny = bundle.features.dim(2);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < ny; ++j) {
        const std::size_t si = axis == FlipAxis::kX ? nx - 1 - i : i;
        const std::size_t sj = axis == FlipAxis::kY ? ny - 1 - j : j;
        out.features(c, i, j) = bundle.features(c, si, sj);
      }
  return out;
}

template <typename T>
SceneBundle<T> bev_flip(const SceneBundle<T>& bundle, FlipAxis axis,
                        double probability, std::uint64_t seed) {
  Rng rng(seed);
  if (!rng.bernoulli(probability)) return bundle;
  return flip_bundle(bundle, axis);
}

#define TPVOCC_INSTANTIATE(T)                                                 \
  template struct CutMixResult<T>;                                          \
  template CutMixResult<T> cutmix(std::span<const SceneBundle<T>>,          \
                                  const CutMixConfig&);                     \
  template SceneBundle<T> flip_bundle(const SceneBundle<T>&, FlipAxis);     \
  template SceneBundle<T> bev_flip(const SceneBundle<T>&, FlipAxis, double, \
                                   std::uint64_t);

TPVOCC_INSTANTIATE(float)
TPVOCC_INSTANTIATE(double)
#undef TPVOCC_INSTANTIATE

}  // namespace tpvocc
