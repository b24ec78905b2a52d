// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "tpvocc/random.hpp"
#include "tpvocc/tensor.hpp"

namespace tpvocc {

// Tri-perspective embedding layouts (C channels first):
//   BEV  C x nx x ny   (z folded into channels)
//   FV   C x ny x nz   (x folded into channels)
//   SV   C x nx x nz   (y folded into channels)

/// Weights C_out x C_in x k x k and bias C_out of one 2D convolution.
template <typename T>
struct Conv2dParams {
  Tensor<T> weight;
  Tensor<T> bias;

  std::size_t c_out() const { return weight.dim(0); }
  std::size_t c_in() const { return weight.dim(1); }
  std::size_t kernel() const { return weight.dim(2); }

  static Conv2dParams zeros(std::size_t c_out, std::size_t c_in, std::size_t k);
  /// 1x1 kernel that copies channel c to channel c.
  static Conv2dParams identity(std::size_t channels);
  /// Uniform in [-s, s] with s = (c_in * k^2)^(-1/2); zero bias.
  static Conv2dParams uniform_init(std::size_t c_out, std::size_t c_in,
                                   std::size_t k, Rng& rng);

  void validate() const;
};

template <typename T>
struct Conv2dGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

/// A site made of one or more stacked convolutions, with no activation in
/// between.
template <typename T>
using ConvStack = std::vector<Conv2dParams<T>>;

/// Stride-1 cross-correlation with zero "same" padding, plus bias.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Conv2dParams<T>& params);

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input,
                               const Conv2dParams<T>& params,
                               const Tensor<T>& upstream);

/// Returns every intermediate: [0] is the input, back() the output.
template <typename T>
std::vector<Tensor<T>> conv_stack_forward(const Tensor<T>& input,
                                          const ConvStack<T>& stack);

/// Per-layer gradients; element 0 also carries the gradient of the stack
/// input.
template <typename T>
std::vector<Conv2dGrads<T>> conv_stack_backward(
    const std::vector<Tensor<T>>& activations, const ConvStack<T>& stack,
    const Tensor<T>& upstream);

enum class ChannelAxis { kZ, kX, kY };

/// Index permutation of an nx x ny x nz grid that brings `axis` to the
/// front: Z -> nz x nx x ny, X -> nx x ny x nz, Y -> ny x nx x nz.
template <typename T>
Tensor<T> spatial_to_channel(const Tensor<T>& occ, ChannelAxis axis);

/// Inverse of spatial_to_channel.
template <typename T>
Tensor<T> channel_to_spatial(const Tensor<T>& t, ChannelAxis axis);

/// Swaps the last two axes of a C x A x B tensor.
template <typename T>
Tensor<T> transpose_last(const Tensor<T>& t);

template <typename T>
struct TpvEmbeddings {
  Tensor<T> bev;
  Tensor<T> fv;
  Tensor<T> sv;
};

template <typename T>
struct ExtractionConvs {
  ConvStack<T> bev, fv, sv;
};

template <typename T>
TpvEmbeddings<T> extract_tpv(const Tensor<T>& occ,
                             const ExtractionConvs<T>& convs);

template <typename T>
TpvEmbeddings<T> extract_tpv(const Tensor<T>& occ,
                             const Conv2dParams<T>& params_bev,
                             const Conv2dParams<T>& params_fv,
                             const Conv2dParams<T>& params_sv);

template <typename T>
struct ExtractionGrads {
  Tensor<T> occ;
  std::vector<Conv2dGrads<T>> bev, fv, sv;
};

template <typename T>
ExtractionGrads<T> extract_tpv_backward(const Tensor<T>& occ,
                                        const ExtractionConvs<T>& convs,
                                        const TpvEmbeddings<T>& upstream);

/// Per-channel product of C x A x K by C x K x B. With `mean_over_vanished`
/// the sum over K is divided by K.
template <typename T>
Tensor<T> tpv_matmul(const Tensor<T>& lhs, const Tensor<T>& rhs,
                     bool mean_over_vanished);

template <typename T>
struct MatmulGrads {
  Tensor<T> lhs;
  Tensor<T> rhs;
};

template <typename T>
MatmulGrads<T> tpv_matmul_backward(const Tensor<T>& lhs, const Tensor<T>& rhs,
                                   const Tensor<T>& upstream,
                                   bool mean_over_vanished);

/// Convolution sites of the interaction module.
template <typename T>
struct LtiConvs {
  ConvStack<T> bev, fv, sv, fuse;
};

/// Intermediates kept by the forward pass for the backward pass.
template <typename T>
struct LtiCache {
  std::vector<Tensor<T>> bev_acts;   // conv_bev over E_BEV + (E_SV x E_FV^T)
  std::vector<Tensor<T>> fv_acts;    // conv_fv over E_FV + (E_BEV^T x E_SV)
  std::vector<Tensor<T>> sv_acts;    // conv_sv over E_SV + (E_BEV x E_FV)
  std::vector<Tensor<T>> fuse_acts;  // conv_fuse over E^I_BEV + (E^I_SV x E^I_FV^T)

  const Tensor<T>& interacted_bev() const { return bev_acts.back(); }
  const Tensor<T>& interacted_fv() const { return fv_acts.back(); }
  const Tensor<T>& interacted_sv() const { return sv_acts.back(); }
  const Tensor<T>& spatial() const { return fuse_acts.back(); }
};

/// Fuses the three views into a C x nx x ny spatial embedding.
template <typename T>
Tensor<T> lti_interact(const TpvEmbeddings<T>& e, const LtiConvs<T>& convs,
                       bool mean_over_vanished);

template <typename T>
LtiCache<T> lti_forward(const TpvEmbeddings<T>& e, const LtiConvs<T>& convs,
                        bool mean_over_vanished);

template <typename T>
struct LtiGrads {
  TpvEmbeddings<T> inputs;
  std::vector<Conv2dGrads<T>> bev, fv, sv, fuse;
};

template <typename T>
LtiGrads<T> lti_backward(const TpvEmbeddings<T>& e, const LtiConvs<T>& convs,
                         bool mean_over_vanished, const LtiCache<T>& cache,
                         const Tensor<T>& upstream);

/// Convenience overload that runs the forward pass internally.
template <typename T>
LtiGrads<T> lti_backward(const TpvEmbeddings<T>& e, const LtiConvs<T>& convs,
                         bool mean_over_vanished, const Tensor<T>& upstream);

}  // namespace tpvocc
