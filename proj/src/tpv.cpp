// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpvocc/tpv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

namespace tpvocc {

using Index = std::ptrdiff_t;

template <typename T>
Conv2dParams<T> Conv2dParams<T>::zeros(std::size_t c_out, std::size_t c_in,
                                       std::size_t k) {
  return {Tensor<T>({c_out, c_in, k, k}), Tensor<T>({c_out})};
}

template <typename T>
Conv2dParams<T> Conv2dParams<T>::identity(std::size_t channels) {
  Conv2dParams p = zeros(channels, channels, 1);
  for (std::size_t c = 0; c < channels; ++c) p.weight(c, c, 0, 0) = T(1);
  return p;
}

template <typename T>
Conv2dParams<T> Conv2dParams<T>::uniform_init(std::size_t c_out,
                                              std::size_t c_in, std::size_t k,
                                              Rng& rng) {
  Conv2dParams p = zeros(c_out, c_in, k);
  const double s = 1.0 / std::sqrt(static_cast<double>(c_in * k * k));
  for (T& w : p.weight.data()) w = static_cast<T>(rng.uniform(-s, s));
  return p;
}

template <typename T>
void Conv2dParams<T>::validate() const {
  if (weight.rank() != 4 || weight.dim(2) != weight.dim(3)) {
    throw ShapeError("conv weight must be C_out x C_in x k x k, got " +
                     shape_str(weight.shape()));
  }
  if (kernel() != 1 && kernel() != 3) {
    throw ShapeError("conv kernel size must be 1 or 3, got " +
                     std::to_string(kernel()));
  }
  require_shape(bias.shape(), {c_out()}, "conv bias");
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Conv2dParams<T>& params) {
  params.validate();
  if (input.rank() != 3 || input.dim(0) != params.c_in()) {
    throw ShapeError("conv2d: input " + shape_str(input.shape()) +
                     " does not have " + std::to_string(params.c_in()) +
                     " channels");
  }
  const std::size_t c_in = params.c_in(), c_out = params.c_out();
  const auto A = static_cast<Index>(input.dim(1));
  const auto B = static_cast<Index>(input.dim(2));
  const auto K = static_cast<Index>(params.kernel());
  const Index pad = (K - 1) / 2;
  const std::size_t plane = input.dim(1) * input.dim(2);

  Tensor<T> out({c_out, input.dim(1), input.dim(2)});
  const T* w = params.weight.ptr();
#pragma omp parallel for schedule(static)
  for (std::int64_t co = 0; co < static_cast<std::int64_t>(c_out); ++co) {
    T* o = out.ptr() + co * plane;
    std::fill(o, o + plane, params.bias[co]);
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const T* in = input.ptr() + ci * plane;
      for (Index ky = 0; ky < K; ++ky) {
        const Index dy = ky - pad;
        const Index a_lo = std::max<Index>(0, -dy), a_hi = std::min(A, A - dy);
        for (Index kx = 0; kx < K; ++kx) {
          const Index dx = kx - pad;
          const Index b_lo = std::max<Index>(0, -dx), b_hi = std::min(B, B - dx);
          const T wv = w[((co * c_in + ci) * K + ky) * K + kx];
          for (Index a = a_lo; a < a_hi; ++a) {
            T* orow = o + a * B;
            const T* irow = in + (a + dy) * B + dx;
            for (Index b = b_lo; b < b_hi; ++b) orow[b] += wv * irow[b];
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input,
                               const Conv2dParams<T>& params,
                               const Tensor<T>& upstream) {
  params.validate();
  if (input.rank() != 3 || input.dim(0) != params.c_in()) {
    throw ShapeError("conv2d_backward: input channel mismatch");
  }
  require_shape(upstream.shape(), {params.c_out(), input.dim(1), input.dim(2)},
                "conv2d_backward upstream");
  const std::size_t c_in = params.c_in(), c_out = params.c_out();
  const auto A = static_cast<Index>(input.dim(1));
  const auto B = static_cast<Index>(input.dim(2));
  const auto K = static_cast<Index>(params.kernel());
  const Index pad = (K - 1) / 2;
  const std::size_t plane = input.dim(1) * input.dim(2);
  const T* w = params.weight.ptr();

  Conv2dGrads<T> g{Tensor<T>(input.shape()), Tensor<T>(params.weight.shape()),
                   Tensor<T>(params.bias.shape())};

#pragma omp parallel for schedule(static)
  for (std::int64_t ci = 0; ci < static_cast<std::int64_t>(c_in); ++ci) {
    T* gin = g.input.ptr() + ci * plane;
    for (std::size_t co = 0; co < c_out; ++co) {
      const T* up = upstream.ptr() + co * plane;
      for (Index ky = 0; ky < K; ++ky) {
        const Index dy = ky - pad;
        const Index a_lo = std::max<Index>(0, -dy), a_hi = std::min(A, A - dy);
        for (Index kx = 0; kx < K; ++kx) {
          const Index dx = kx - pad;
          const Index b_lo = std::max<Index>(0, -dx), b_hi = std::min(B, B - dx);
          const T wv = w[((co * c_in + ci) * K + ky) * K + kx];
          for (Index a = a_lo; a < a_hi; ++a) {
            T* grow = gin + (a + dy) * B + dx;
            const T* urow = up + a * B;
            for (Index b = b_lo; b < b_hi; ++b) grow[b] += wv * urow[b];
          }
        }
      }
    }
  }

#pragma omp parallel for schedule(static)
  for (std::int64_t co = 0; co < static_cast<std::int64_t>(c_out); ++co) {
    const T* up = upstream.ptr() + co * plane;
    T bias_acc = T(0);
    for (std::size_t q = 0; q < plane; ++q) bias_acc += up[q];
    g.bias[co] = bias_acc;
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const T* in = input.ptr() + ci * plane;
      for (Index ky = 0; ky < K; ++ky) {
        const Index dy = ky - pad;
        const Index a_lo = std::max<Index>(0, -dy), a_hi = std::min(A, A - dy);
        for (Index kx = 0; kx < K; ++kx) {
          const Index dx = kx - pad;
          const Index b_lo = std::max<Index>(0, -dx), b_hi = std::min(B, B - dx);
          T acc = T(0);
          for (Index a = a_lo; a < a_hi; ++a) {
            const T* urow = up + a * B;
            const T* irow = in + (a + dy) * B + dx;
            for (Index b = b_lo; b < b_hi; ++b) acc += urow[b] * irow[b];
          }
          g.weight[((co * c_in + ci) * K + ky) * K + kx] = acc;
        }
      }
    }
  }
  return g;
}

template <typename T>
std::vector<Tensor<T>> conv_stack_forward(const Tensor<T>& input,
                                          const ConvStack<T>& stack) {
  if (stack.empty()) throw ShapeError("empty convolution stack");
  std::vector<Tensor<T>> acts;
  acts.reserve(stack.size() + 1);
  acts.push_back(input);
  for (const auto& layer : stack) acts.push_back(conv2d(acts.back(), layer));
  return acts;
}

template <typename T>
std::vector<Conv2dGrads<T>> conv_stack_backward(
    const std::vector<Tensor<T>>& activations, const ConvStack<T>& stack,
    const Tensor<T>& upstream) {
  if (activations.size() != stack.size() + 1) {
    throw ShapeError("conv stack backward: activation count mismatch");
  }
  std::vector<Conv2dGrads<T>> grads(stack.size());
  const Tensor<T>* g = &upstream;
  for (std::size_t i = stack.size(); i-- > 0;) {
    grads[i] = conv2d_backward(activations[i], stack[i], *g);
    g = &grads[i].input;
  }
  return grads;
}

template <typename T>
Tensor<T> spatial_to_channel(const Tensor<T>& occ, ChannelAxis axis) {
  if (occ.rank() != 3) throw ShapeError("spatial_to_channel expects nx x ny x nz");
  const std::size_t nx = occ.dim(0), ny = occ.dim(1), nz = occ.dim(2);
  switch (axis) {
    case ChannelAxis::kX:
      return occ;
    case ChannelAxis::kZ: {
      Tensor<T> out({nz, nx, ny});
      for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j)
          for (std::size_t k = 0; k < nz; ++k) out(k, i, j) = occ(i, j, k);
      return out;
    }
    case ChannelAxis::kY: {
      Tensor<T> out({ny, nx, nz});
      for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j)
          for (std::size_t k = 0; k < nz; ++k) out(j, i, k) = occ(i, j, k);
      return out;
    }
  }
  return occ;
}

template <typename T>
Tensor<T> channel_to_spatial(const Tensor<T>& t, ChannelAxis axis) {
  if (t.rank() != 3) throw ShapeError("channel_to_spatial expects a rank-3 tensor");
  switch (axis) {
    case ChannelAxis::kX:
      return t;
    case ChannelAxis::kZ: {
      const std::size_t nz = t.dim(0), nx = t.dim(1), ny = t.dim(2);
      Tensor<T> out({nx, ny, nz});
      for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j)
          for (std::size_t k = 0; k < nz; ++k) out(i, j, k) = t(k, i, j);
      return out;
    }
    case ChannelAxis::kY: {
      const std::size_t ny = t.dim(0), nx = t.dim(1), nz = t.dim(2);
      Tensor<T> out({nx, ny, nz});
      for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j)
          for (std::size_t k = 0; k < nz; ++k) out(i, j, k) = t(j, i, k);
      return out;
    }
  }
  return t;
}

template <typename T>
Tensor<T> transpose_last(const Tensor<T>& t) {
  if (t.rank() != 3) throw ShapeError("transpose_last expects a rank-3 tensor");
  const std::size_t C = t.dim(0), A = t.dim(1), B = t.dim(2);
  Tensor<T> out({C, B, A});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t b = 0; b < B; ++b) out(c, b, a) = t(c, a, b);
  return out;
}

namespace {

template <typename T>
void check_site(const ConvStack<T>& stack, std::size_t c_in, std::size_t c_out,
                const char* site) {
  if (stack.empty()) throw ShapeError(std::string(site) + ": no convolution");
  if (stack.front().c_in() != c_in) {
    throw ShapeError(std::string(site) + ": first conv takes " +
                     std::to_string(stack.front().c_in()) +
                     " channels, expected " + std::to_string(c_in));
  }
  for (std::size_t i = 1; i < stack.size(); ++i) {
    if (stack[i].c_in() != stack[i - 1].c_out()) {
      throw ShapeError(std::string(site) + ": stacked conv channel mismatch");
    }
  }
  if (c_out != 0 && stack.back().c_out() != c_out) {
    throw ShapeError(std::string(site) + ": output channel mismatch");
  }
}

}  // namespace

template <typename T>
TpvEmbeddings<T> extract_tpv(const Tensor<T>& occ,
                             const ExtractionConvs<T>& convs) {
  if (occ.rank() != 3) throw ShapeError("extract_tpv expects nx x ny x nz");
  check_site(convs.bev, occ.dim(2), 0, "extract_bev");
  const std::size_t C = convs.bev.back().c_out();
  check_site(convs.fv, occ.dim(0), C, "extract_fv");
  check_site(convs.sv, occ.dim(1), C, "extract_sv");
  return {
      conv_stack_forward(spatial_to_channel(occ, ChannelAxis::kZ), convs.bev).back(),
      conv_stack_forward(spatial_to_channel(occ, ChannelAxis::kX), convs.fv).back(),
      conv_stack_forward(spatial_to_channel(occ, ChannelAxis::kY), convs.sv).back()};
}

template <typename T>
TpvEmbeddings<T> extract_tpv(const Tensor<T>& occ,
                             const Conv2dParams<T>& params_bev,
                             const Conv2dParams<T>& params_fv,
                             const Conv2dParams<T>& params_sv) {
  return extract_tpv(occ, ExtractionConvs<T>{{params_bev}, {params_fv}, {params_sv}});
}

template <typename T>
ExtractionGrads<T> extract_tpv_backward(const Tensor<T>& occ,
                                        const ExtractionConvs<T>& convs,
                                        const TpvEmbeddings<T>& upstream) {
  ExtractionGrads<T> g;
  const auto bev_in = spatial_to_channel(occ, ChannelAxis::kZ);
  const auto fv_in = spatial_to_channel(occ, ChannelAxis::kX);
  const auto sv_in = spatial_to_channel(occ, ChannelAxis::kY);
  g.bev = conv_stack_backward(conv_stack_forward(bev_in, convs.bev), convs.bev,
                              upstream.bev);
  g.fv = conv_stack_backward(conv_stack_forward(fv_in, convs.fv), convs.fv,
                             upstream.fv);
  g.sv = conv_stack_backward(conv_stack_forward(sv_in, convs.sv), convs.sv,
                             upstream.sv);
  g.occ = channel_to_spatial(g.bev.front().input, ChannelAxis::kZ);
  add_inplace(g.occ, channel_to_spatial(g.fv.front().input, ChannelAxis::kX));
  add_inplace(g.occ, channel_to_spatial(g.sv.front().input, ChannelAxis::kY));
  return g;
}

namespace {

void check_matmul(const Shape& lhs, const Shape& rhs) {
  if (lhs.size() != 3 || rhs.size() != 3 || lhs[0] != rhs[0] || lhs[2] != rhs[1]) {
    throw ShapeError("tpv_matmul: cannot multiply " + shape_str(lhs) + " by " +
                     shape_str(rhs));
  }
}

}  // namespace

template <typename T>
Tensor<T> tpv_matmul(const Tensor<T>& lhs, const Tensor<T>& rhs,
                     bool mean_over_vanished) {
  check_matmul(lhs.shape(), rhs.shape());
  const std::size_t C = lhs.dim(0), A = lhs.dim(1), K = lhs.dim(2), B = rhs.dim(2);
  Tensor<T> out({C, A, B});
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < static_cast<std::int64_t>(C); ++c) {
    const T* l = lhs.ptr() + c * A * K;
    const T* r = rhs.ptr() + c * K * B;
    T* o = out.ptr() + c * A * B;
    for (std::size_t a = 0; a < A; ++a) {
      T* orow = o + a * B;
      for (std::size_t k = 0; k < K; ++k) {
        const T lv = l[a * K + k];
        const T* rrow = r + k * B;
        for (std::size_t b = 0; b < B; ++b) orow[b] += lv * rrow[b];
      }
      if (mean_over_vanished) {
        for (std::size_t b = 0; b < B; ++b) orow[b] /= static_cast<T>(K);
      }
    }
  }
  return out;
}

template <typename T>
MatmulGrads<T> tpv_matmul_backward(const Tensor<T>& lhs, const Tensor<T>& rhs,
                                   const Tensor<T>& upstream,
                                   bool mean_over_vanished) {
  check_matmul(lhs.shape(), rhs.shape());
  const std::size_t C = lhs.dim(0), A = lhs.dim(1), K = lhs.dim(2), B = rhs.dim(2);
  require_shape(upstream.shape(), {C, A, B}, "tpv_matmul_backward upstream");
  MatmulGrads<T> g{Tensor<T>(lhs.shape()), Tensor<T>(rhs.shape())};
  const T scale = mean_over_vanished ? T(1) / static_cast<T>(K) : T(1);
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < static_cast<std::int64_t>(C); ++c) {
    const T* l = lhs.ptr() + c * A * K;
    const T* r = rhs.ptr() + c * K * B;
    const T* u = upstream.ptr() + c * A * B;
    T* gl = g.lhs.ptr() + c * A * K;
    T* gr = g.rhs.ptr() + c * K * B;
    for (std::size_t a = 0; a < A; ++a) {
      const T* urow = u + a * B;
      for (std::size_t k = 0; k < K; ++k) {
        const T* rrow = r + k * B;
        T acc = T(0);
        for (std::size_t b = 0; b < B; ++b) acc += urow[b] * rrow[b];
        gl[a * K + k] = acc * scale;
        const T lv = l[a * K + k] * scale;
        T* grow = gr + k * B;
        for (std::size_t b = 0; b < B; ++b) grow[b] += lv * urow[b];
      }
    }
  }
  return g;
}

namespace {

template <typename T>
void check_lti(const TpvEmbeddings<T>& e, const LtiConvs<T>& convs) {
  if (e.bev.rank() != 3 || e.fv.rank() != 3 || e.sv.rank() != 3) {
    throw ShapeError("lti: embeddings must be rank 3");
  }
  const std::size_t C = e.bev.dim(0), X = e.bev.dim(1), Y = e.bev.dim(2);
  const std::size_t Z = e.fv.dim(2);
  require_shape(e.fv.shape(), {C, Y, Z}, "lti: FV embedding");
  require_shape(e.sv.shape(), {C, X, Z}, "lti: SV embedding");
  check_site(convs.bev, C, C, "lti_bev");
  check_site(convs.fv, C, C, "lti_fv");
  check_site(convs.sv, C, C, "lti_sv");
  check_site(convs.fuse, C, C, "lti_fuse");
}

}  // namespace

template <typename T>
LtiCache<T> lti_forward(const TpvEmbeddings<T>& e, const LtiConvs<T>& convs,
                        bool mean_over_vanished) {
  check_lti(e, convs);
  const bool mean = mean_over_vanished;
  LtiCache<T> cache;
  // BEV: (C x X x Z) x (C x Z x Y), vanished Z.
  cache.bev_acts = conv_stack_forward(
      add(e.bev, tpv_matmul(e.sv, transpose_last(e.fv), mean)), convs.bev);
  // FV: (C x Y x X) x (C x X x Z), vanished X.
  cache.fv_acts = conv_stack_forward(
      add(e.fv, tpv_matmul(transpose_last(e.bev), e.sv, mean)), convs.fv);
  // SV: (C x X x Y) x (C x Y x Z), vanished Y.
  cache.sv_acts = conv_stack_forward(
      add(e.sv, tpv_matmul(e.bev, e.fv, mean)), convs.sv);
  cache.fuse_acts = conv_stack_forward(
      add(cache.interacted_bev(),
          tpv_matmul(cache.interacted_sv(), transpose_last(cache.interacted_fv()),
                     mean)),
      convs.fuse);
  return cache;
}

template <typename T>
Tensor<T> lti_interact(const TpvEmbeddings<T>& e, const LtiConvs<T>& convs,
                       bool mean_over_vanished) {
  return lti_forward(e, convs, mean_over_vanished).spatial();
}

template <typename T>
LtiGrads<T> lti_backward(const TpvEmbeddings<T>& e, const LtiConvs<T>& convs,
                         bool mean_over_vanished, const LtiCache<T>& cache,
                         const Tensor<T>& upstream) {
  check_lti(e, convs);
  require_shape(upstream.shape(), e.bev.shape(), "lti_backward upstream");
  const bool mean = mean_over_vanished;
  LtiGrads<T> g;

  g.fuse = conv_stack_backward(cache.fuse_acts, convs.fuse, upstream);
  const Tensor<T>& g_fused = g.fuse.front().input;
  const auto mm_s = tpv_matmul_backward(cache.interacted_sv(),
                                        transpose_last(cache.interacted_fv()),
                                        g_fused, mean);

  g.bev = conv_stack_backward(cache.bev_acts, convs.bev, g_fused);
  g.sv = conv_stack_backward(cache.sv_acts, convs.sv, mm_s.lhs);
  g.fv = conv_stack_backward(cache.fv_acts, convs.fv, transpose_last(mm_s.rhs));

  // Gradients of the three pre-conv sums flow into the raw embeddings both
  // directly and through the matmuls.
  const Tensor<T>& g_sum_bev = g.bev.front().input;
  const Tensor<T>& g_sum_fv = g.fv.front().input;
  const Tensor<T>& g_sum_sv = g.sv.front().input;
  g.inputs.bev = g_sum_bev;
  g.inputs.fv = g_sum_fv;
  g.inputs.sv = g_sum_sv;

  const auto mm_bev = tpv_matmul_backward(e.sv, transpose_last(e.fv), g_sum_bev, mean);
  add_inplace(g.inputs.sv, mm_bev.lhs);
  add_inplace(g.inputs.fv, transpose_last(mm_bev.rhs));

  const auto mm_fv = tpv_matmul_backward(transpose_last(e.bev), e.sv, g_sum_fv, mean);
  add_inplace(g.inputs.bev, transpose_last(mm_fv.lhs));
  add_inplace(g.inputs.sv, mm_fv.rhs);

  const auto mm_sv = tpv_matmul_backward(e.bev, e.fv, g_sum_sv, mean);
  add_inplace(g.inputs.bev, mm_sv.lhs);
  add_inplace(g.inputs.fv, mm_sv.rhs);
  return g;
}

template <typename T>
LtiGrads<T> lti_backward(const TpvEmbeddings<T>& e, const LtiConvs<T>& convs,
                         bool mean_over_vanished, const Tensor<T>& upstream) {
  return lti_backward(e, convs, mean_over_vanished,
                      lti_forward(e, convs, mean_over_vanished), upstream);
}

#define TPVOCC_INSTANTIATE(T)                                                   \
  template struct Conv2dParams<T>;                                            \
  template Tensor<T> conv2d(const Tensor<T>&, const Conv2dParams<T>&);        \
  template Conv2dGrads<T> conv2d_backward(const Tensor<T>&,                   \
                                          const Conv2dParams<T>&,             \
                                          const Tensor<T>&);                  \
  template std::vector<Tensor<T>> conv_stack_forward(const Tensor<T>&,        \
                                                     const ConvStack<T>&);    \
  template std::vector<Conv2dGrads<T>> conv_stack_backward(                   \
      const std::vector<Tensor<T>>&, const ConvStack<T>&, const Tensor<T>&);  \
  template Tensor<T> spatial_to_channel(const Tensor<T>&, ChannelAxis);       \
  template Tensor<T> channel_to_spatial(const Tensor<T>&, ChannelAxis);       \
  template Tensor<T> transpose_last(const Tensor<T>&);                        \
  template TpvEmbeddings<T> extract_tpv(const Tensor<T>&,                     \
                                        const ExtractionConvs<T>&);           \
  template TpvEmbeddings<T> extract_tpv(                                      \
      const Tensor<T>&, const Conv2dParams<T>&, const Conv2dParams<T>&,       \
      const Conv2dParams<T>&);                                                \
  template ExtractionGrads<T> extract_tpv_backward(                           \
      const Tensor<T>&, const ExtractionConvs<T>&, const TpvEmbeddings<T>&);  \
  template Tensor<T> tpv_matmul(const Tensor<T>&, const Tensor<T>&, bool);    \
  template MatmulGrads<T> tpv_matmul_backward(                                \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, bool);            \
  template LtiCache<T> lti_forward(const TpvEmbeddings<T>&,                   \
                                   const LtiConvs<T>&, bool);                 \
  template Tensor<T> lti_interact(const TpvEmbeddings<T>&,                    \
                                  const LtiConvs<T>&, bool);                  \
  template LtiGrads<T> lti_backward(const TpvEmbeddings<T>&,                  \
                                    const LtiConvs<T>&, bool,                 \
                                    const LtiCache<T>&, const Tensor<T>&);    \
  template LtiGrads<T> lti_backward(const TpvEmbeddings<T>&,                  \
                                    const LtiConvs<T>&, bool,                 \
                                    const Tensor<T>&);

TPVOCC_INSTANTIATE(float)
TPVOCC_INSTANTIATE(double)
#undef TPVOCC_INSTANTIATE

}  // namespace tpvocc
