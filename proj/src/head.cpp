// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpvocc/head.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tpvocc {

void LabeledOccupancy::validate() const {
  if (labels.rank() != 3) throw ShapeError("labels must be nx x ny x nz");
  if (num_classes < 2 || num_classes > 256) {
    throw ShapeError("class count must be in [2, 256]");
  }
  for (std::uint8_t v : labels.data()) {
    if (v >= num_classes) {
      throw DataError("label " + std::to_string(v) + " out of range for " +
                      std::to_string(num_classes) + " classes");
    }
  }
}

std::size_t VisibilityMask::count() const {
  return static_cast<std::size_t>(
      std::count_if(visible.data().begin(), visible.data().end(),
                    [](std::uint8_t v) { return v != 0; }));
}

template <typename T>
Tensor<T> fuse(const Tensor<T>& bev_features, const Tensor<T>& spatial) {
  require_shape(spatial.shape(), bev_features.shape(), "fuse");
  return add(bev_features, spatial);
}

template <typename T>
Tensor<T> channel_to_height(const Tensor<T>& head_out, std::size_t num_classes) {
  if (head_out.rank() != 3 || num_classes == 0 ||
      head_out.dim(0) % num_classes != 0) {
    throw ShapeError("channel_to_height: " + std::to_string(head_out.dim(0)) +
                     " channels are not a multiple of " +
                     std::to_string(num_classes) + " classes");
  }
  const std::size_t L = num_classes, nz = head_out.dim(0) / L;
  const std::size_t nx = head_out.dim(1), ny = head_out.dim(2);
  Tensor<T> out({nx, ny, nz, L});
  for (std::size_t c = 0; c < nz * L; ++c) {
    const std::size_t z = c / L, cls = c % L;
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < ny; ++j) out(i, j, z, cls) = head_out(c, i, j);
  }
  return out;
}

template <typename T>
Tensor<T> height_to_channel(const Tensor<T>& logits) {
  if (logits.rank() != 4) throw ShapeError("height_to_channel expects rank 4");
  const std::size_t nx = logits.dim(0), ny = logits.dim(1);
  const std::size_t nz = logits.dim(2), L = logits.dim(3);
  Tensor<T> out({nz * L, nx, ny});
  for (std::size_t c = 0; c < nz * L; ++c)
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < ny; ++j) out(c, i, j) = logits(i, j, c / L, c % L);
  return out;
}

template <typename T>
Tensor<T> predict_forward(const Tensor<T>& fused, const HeadParams<T>& params,
                          std::size_t num_classes, HeadCache<T>& cache) {
  ConvStack<T> stack = params.bev;
  stack.push_back(params.head);
  if (params.head.c_out() % num_classes != 0) {
    throw ShapeError("head conv output channels must be nz * num_classes");
  }
  cache.acts = conv_stack_forward(fused, stack);
  return channel_to_height(cache.acts.back(), num_classes);
}

template <typename T>
Tensor<T> predict(const Tensor<T>& fused, const HeadParams<T>& params,
                  std::size_t num_classes) {
  HeadCache<T> cache;
  return predict_forward(fused, params, num_classes, cache);
}

template <typename T>
HeadGrads<T> predict_backward(const HeadParams<T>& params,
                              const HeadCache<T>& cache,
                              const Tensor<T>& grad_logits) {
  ConvStack<T> stack = params.bev;
  stack.push_back(params.head);
  auto layers = conv_stack_backward(cache.acts, stack, height_to_channel(grad_logits));
  HeadGrads<T> g;
  g.fused = layers.front().input;
  g.head = std::move(layers.back());
  layers.pop_back();
  g.bev = std::move(layers);
  return g;
}

template <typename T>
Labels argmax_labels(const Tensor<T>& logits) {
  if (logits.rank() != 4) throw ShapeError("argmax expects nx x ny x nz x L");
  const std::size_t L = logits.dim(3);
  Labels out({logits.dim(0), logits.dim(1), logits.dim(2)});
  for (std::size_t v = 0; v < out.size(); ++v) {
    const T* row = logits.ptr() + v * L;
    std::size_t best = 0;
    for (std::size_t c = 1; c < L; ++c) {
      if (row[c] > row[best]) best = c;
    }
    out[v] = static_cast<std::uint8_t>(best);
  }
  return out;
}

template <typename T>
LossResult<T> cross_entropy(const Tensor<T>& logits,
                            const LabeledOccupancy& labels,
                            const VisibilityMask& mask) {
  if (logits.rank() != 4) throw ShapeError("cross_entropy expects nx x ny x nz x L");
  const Shape grid{logits.dim(0), logits.dim(1), logits.dim(2)};
  require_shape(labels.labels.shape(), grid, "cross_entropy labels");
  require_shape(mask.visible.shape(), grid, "cross_entropy mask");
  const std::size_t L = logits.dim(3);
  const std::size_t visible = mask.count();
  if (visible == 0) throw DataError("cross_entropy: no visible voxels");

  LossResult<T> r{0.0, Tensor<T>(logits.shape())};
  const double inv = 1.0 / static_cast<double>(visible);
  std::vector<double> p(L);
  for (std::size_t v = 0; v < shape_size(grid); ++v) {
    if (!mask.visible[v]) continue;
    const std::size_t label = labels.labels[v];
    if (label >= L) throw DataError("cross_entropy: label out of range");
    const T* row = logits.ptr() + v * L;
    double peak = row[0];
    for (std::size_t c = 1; c < L; ++c) peak = std::max(peak, static_cast<double>(row[c]));
    double total = 0.0;
    for (std::size_t c = 0; c < L; ++c) {
      p[c] = std::exp(static_cast<double>(row[c]) - peak);
      total += p[c];
    }
    r.loss += (std::log(total) + peak - static_cast<double>(row[label])) * inv;
    T* g = r.grad.ptr() + v * L;
    for (std::size_t c = 0; c < L; ++c) {
      g[c] = static_cast<T>((p[c] / total - (c == label ? 1.0 : 0.0)) * inv);
    }
  }
  return r;
}

template <typename T>
void sgd_step(Tensor<T>& param, const Tensor<T>& grad, double lr) {
  require_shape(grad.shape(), param.shape(), "sgd_step");
  const T step = static_cast<T>(lr);
  for (std::size_t i = 0; i < param.size(); ++i) param[i] -= step * grad[i];
}

template <typename T>
void sgd_step(Conv2dParams<T>& params, const Conv2dGrads<T>& grads, double lr) {
  sgd_step(params.weight, grads.weight, lr);
  sgd_step(params.bias, grads.bias, lr);
}

#define TPVOCC_INSTANTIATE(T)                                                  \
  template Tensor<T> fuse(const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> channel_to_height(const Tensor<T>&, std::size_t);       \
  template Tensor<T> height_to_channel(const Tensor<T>&);                    \
  template Tensor<T> predict(const Tensor<T>&, const HeadParams<T>&,         \
                             std::size_t);                                   \
  template Tensor<T> predict_forward(const Tensor<T>&, const HeadParams<T>&, \
                                     std::size_t, HeadCache<T>&);            \
  template HeadGrads<T> predict_backward(const HeadParams<T>&,               \
                                         const HeadCache<T>&,                \
                                         const Tensor<T>&);                  \
  template Labels argmax_labels(const Tensor<T>&);                           \
  template LossResult<T> cross_entropy(const Tensor<T>&,                     \
                                       const LabeledOccupancy&,              \
                                       const VisibilityMask&);               \
  template void sgd_step(Tensor<T>&, const Tensor<T>&, double);              \
  template void sgd_step(Conv2dParams<T>&, const Conv2dGrads<T>&, double);

TPVOCC_INSTANTIATE(float)
TPVOCC_INSTANTIATE(double)
#undef TPVOCC_INSTANTIATE

}  // namespace tpvocc
