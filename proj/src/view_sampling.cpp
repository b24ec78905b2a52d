// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpvocc/view_sampling.hpp"

#include <array>
#include <cmath>
#include <cstdint>

namespace tpvocc {

DepthActivation parse_activation(const std::string& name) {
  if (name == "sigmoid") return DepthActivation::kSigmoid;
  if (name == "softmax") return DepthActivation::kSoftmax;
  if (name == "none") return DepthActivation::kNone;
  throw ConfigError("unknown depth activation '" + name + "'");
}

std::string to_string(DepthActivation a) {
  switch (a) {
    case DepthActivation::kSigmoid: return "sigmoid";
    case DepthActivation::kSoftmax: return "softmax";
    case DepthActivation::kNone: return "none";
  }
  return "none";
}

SamplingMode parse_sampling_mode(const std::string& name) {
  if (name == "trilinear") return SamplingMode::kTrilinear;
  if (name == "nearest_depth") return SamplingMode::kNearestDepthBilinear;
  throw ConfigError("unknown sampling mode '" + name + "'");
}

template <typename T>
DepthDistribution<T> activate_depth(const Tensor<T>& logits,
                                    DepthActivation mode,
                                    const DepthBins& bins) {
  if (logits.rank() != 3) throw ShapeError("depth logits must be D x H x W");
  if (logits.dim(0) != bins.n_bins) {
    throw ShapeError("depth logits have " + std::to_string(logits.dim(0)) +
                     " bins, expected " + std::to_string(bins.n_bins));
  }
  DepthDistribution<T> dist{logits, bins, mode};
  T* v = dist.values.ptr();
  const std::size_t n = logits.size();
  switch (mode) {
    case DepthActivation::kNone:
      break;
    case DepthActivation::kSigmoid:
      for (std::size_t i = 0; i < n; ++i) v[i] = T(1) / (T(1) + std::exp(-v[i]));
      break;
    case DepthActivation::kSoftmax: {
      const std::size_t D = logits.dim(0);
      const std::size_t plane = logits.dim(1) * logits.dim(2);
      for (std::size_t p = 0; p < plane; ++p) {
        T peak = v[p];
        for (std::size_t d = 1; d < D; ++d) peak = std::max(peak, v[d * plane + p]);
        T total = 0;
        for (std::size_t d = 0; d < D; ++d) {
          v[d * plane + p] = std::exp(v[d * plane + p] - peak);
          total += v[d * plane + p];
        }
        for (std::size_t d = 0; d < D; ++d) v[d * plane + p] /= total;
      }
      break;
    }
  }
  return dist;
}

namespace {

// Lattice corners read by one sample; invalid slots carry weight 0 and are
// skipped.
struct Stencil {
  std::array<std::size_t, 8> offset{};
  std::array<double, 8> weight{};
  int count = 0;
};

Stencil make_stencil(std::size_t D, std::size_t H, std::size_t W, double d,
                     double h, double w, SamplingMode mode) {
  Stencil s;
  const double h0 = std::floor(h), w0 = std::floor(w);
  const double fh = h - h0, fw = w - w0;
  const auto hi = static_cast<std::int64_t>(h0);
  const auto wi = static_cast<std::int64_t>(w0);

  auto push = [&](std::int64_t dd, std::int64_t hh, std::int64_t ww,
                  double weight) {
    if (dd < 0 || hh < 0 || ww < 0 || dd >= static_cast<std::int64_t>(D) ||
        hh >= static_cast<std::int64_t>(H) || ww >= static_cast<std::int64_t>(W)) {
      return;
    }
    s.offset[s.count] = (static_cast<std::size_t>(dd) * H +
                         static_cast<std::size_t>(hh)) * W +
                        static_cast<std::size_t>(ww);
    s.weight[s.count] = weight;
    ++s.count;
  };

  if (mode == SamplingMode::kTrilinear) {
    const double d0 = std::floor(d);
    const double fd = d - d0;
    const auto di = static_cast<std::int64_t>(d0);
    for (int a = 0; a < 2; ++a) {
      const double wd = a ? fd : 1.0 - fd;
      for (int b = 0; b < 2; ++b) {
        const double wh = b ? fh : 1.0 - fh;
        for (int c = 0; c < 2; ++c) {
          const double ww = c ? fw : 1.0 - fw;
          push(di + a, hi + b, wi + c, wd * wh * ww);
        }
      }
    }
  } else {
    const auto di = static_cast<std::int64_t>(std::floor(d + 0.5));
    for (int b = 0; b < 2; ++b) {
      const double wh = b ? fh : 1.0 - fh;
      for (int c = 0; c < 2; ++c) {
        const double ww = c ? fw : 1.0 - fw;
        push(di, hi + b, wi + c, wh * ww);
      }
    }
  }
  return s;
}

// Stencil for voxel `center` seen by `cam`; empty when the projection is
// outside the frustum or the depth range.
Stencil voxel_stencil(const CameraModel& cam, const DepthLayout& layout,
                      const Eigen::Vector3d& center, SamplingMode mode) {
  const ImagePoint ip = project(cam, center);
  if (!ip.in_frustum) return {};
  const BinCoord bin = depth_to_bin(ip.d, layout.bins);
  if (!bin.valid) return {};
  return make_stencil(layout.bins.n_bins, layout.H, layout.W, bin.coord, ip.h,
                      ip.w, mode);
}

template <typename T>
void check_inputs(std::span<const CameraModel> cams,
                  std::span<const DepthLayout> layouts) {
  if (cams.empty()) throw ShapeError("global spatial sampling needs a camera");
  if (cams.size() != layouts.size()) {
    throw ShapeError("got " + std::to_string(layouts.size()) +
                     " depth distributions for " + std::to_string(cams.size()) +
                     " cameras");
  }
  for (std::size_t c = 0; c < cams.size(); ++c) {
    if (cams[c].H != layouts[c].H || cams[c].W != layouts[c].W) {
      throw ShapeError("depth distribution " + std::to_string(c) +
                       " does not match its camera's image size");
    }
  }
}

}  // namespace

template <typename T>
T sample(const Tensor<T>& values, double d_bin, double h, double w,
         SamplingMode mode) {
  if (values.rank() != 3) throw ShapeError("sample expects a D x H x W tensor");
  const Stencil s = make_stencil(values.dim(0), values.dim(1), values.dim(2),
                                 d_bin, h, w, mode);
  double acc = 0.0;
  for (int i = 0; i < s.count; ++i) {
    acc += s.weight[i] * static_cast<double>(values[s.offset[i]]);
  }
  return static_cast<T>(acc);
}

template <typename T>
T sample_trilinear(const Tensor<T>& values, double d_bin, double h, double w) {
  return sample(values, d_bin, h, w, SamplingMode::kTrilinear);
}

template <typename T>
Tensor<T> global_spatial_sampling(std::span<const DepthDistribution<T>> dists,
                                  std::span<const CameraModel> cams,
                                  const GridSpec& spec, SamplingMode mode) {
  std::vector<DepthLayout> layouts;
  layouts.reserve(dists.size());
  for (const auto& d : dists) {
    if (d.values.rank() != 3 || d.depth() != d.bins.n_bins) {
      throw ShapeError("depth distribution must be n_bins x H x W");
    }
    layouts.push_back(layout_of(d));
  }
  check_inputs<T>(cams, layouts);

  Tensor<T> out(spec.shape());
  T* o = out.ptr();
  const auto n = static_cast<std::int64_t>(spec.num_voxels());
  const std::size_t nyz = spec.ny * spec.nz;
#pragma omp parallel for schedule(static)
  for (std::int64_t v = 0; v < n; ++v) {
    const auto flat = static_cast<std::size_t>(v);
    const Eigen::Vector3d center =
        spec.center(flat / nyz, (flat / spec.nz) % spec.ny, flat % spec.nz);
    T acc = T(0);
    for (std::size_t c = 0; c < cams.size(); ++c) {
      const Stencil s = voxel_stencil(cams[c], layouts[c], center, mode);
      double sampled = 0.0;
      const T* values = dists[c].values.ptr();
      for (int i = 0; i < s.count; ++i) {
        sampled += s.weight[i] * static_cast<double>(values[s.offset[i]]);
      }
      acc += static_cast<T>(sampled);
    }
    o[flat] = acc;
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> global_spatial_sampling_backward(
    const Tensor<T>& upstream, std::span<const CameraModel> cams,
    const GridSpec& spec, std::span<const DepthLayout> layouts,
    SamplingMode mode) {
  check_inputs<T>(cams, layouts);
  require_shape(upstream.shape(), spec.shape(), "gss backward upstream");

  std::vector<Tensor<T>> grads;
  grads.reserve(cams.size());
  for (const DepthLayout& l : layouts) {
    grads.emplace_back(Shape{l.bins.n_bins, l.H, l.W});
  }
  const auto ncam = static_cast<std::int64_t>(cams.size());
  // Cameras write disjoint gradient tensors; voxels scatter in index order.
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < ncam; ++c) {
    T* g = grads[c].ptr();
    for (std::size_t i = 0; i < spec.nx; ++i) {
      for (std::size_t j = 0; j < spec.ny; ++j) {
        for (std::size_t k = 0; k < spec.nz; ++k) {
          const T up = upstream[spec.flat(i, j, k)];
          if (up == T(0)) continue;
          const Stencil s =
              voxel_stencil(cams[c], layouts[c], spec.center(i, j, k), mode);
          for (int q = 0; q < s.count; ++q) {
            g[s.offset[q]] += static_cast<T>(s.weight[q] * static_cast<double>(up));
          }
        }
      }
    }
  }
  return grads;
}

#define TPVOCC_INSTANTIATE(T)                                                  \
  template DepthDistribution<T> activate_depth(const Tensor<T>&,             \
                                               DepthActivation,              \
                                               const DepthBins&);            \
  template T sample(const Tensor<T>&, double, double, double, SamplingMode); \
  template T sample_trilinear(const Tensor<T>&, double, double, double);     \
  template Tensor<T> global_spatial_sampling(                                \
      std::span<const DepthDistribution<T>>, std::span<const CameraModel>,   \
      const GridSpec&, SamplingMode);                                        \
  template std::vector<Tensor<T>> global_spatial_sampling_backward(          \
      const Tensor<T>&, std::span<const CameraModel>, const GridSpec&,       \
      std::span<const DepthLayout>, SamplingMode);

TPVOCC_INSTANTIATE(float)
TPVOCC_INSTANTIATE(double)
#undef TPVOCC_INSTANTIATE

}  // namespace tpvocc
