// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tpvocc/config.hpp"
#include "tpvocc/head.hpp"
#include "tpvocc/tpv.hpp"
#include "tpvocc/view_sampling.hpp"

namespace tpvocc {

/// Sizes that fix the shape of every parameter tensor.
struct ModelDims {
  std::size_t nx = 0, ny = 0, nz = 0;
  std::size_t channels = 8;
  std::size_t kernel_size = 3;
  std::size_t conv_layers = 1;
  std::size_t bev_layers = 1;
  std::size_t num_classes = kNumClasses;

  static ModelDims from_config(const PipelineConfig& cfg, const GridSpec& grid);
};

struct ModelOptions {
  bool mean_over_vanished = true;
  SamplingMode sampling = SamplingMode::kTrilinear;
  std::size_t num_classes = kNumClasses;

  static ModelOptions from_config(const PipelineConfig& cfg);
};

/// Every convolution of the pipeline. Sites are named extract_{bev,fv,sv},
/// lti_{bev,fv,sv,fuse}, bev and head; layer l > 0 of a site is "<site>.<l>".
template <typename T>
struct PipelineParams {
  ExtractionConvs<T> extract;
  LtiConvs<T> lti;
  HeadParams<T> head;

  static PipelineParams uniform(const ModelDims& dims, Rng& rng);
  static PipelineParams zeros(const ModelDims& dims);
  /// Same shapes as `like`, all zero (gradient accumulator).
  static PipelineParams zeros_like(const PipelineParams& like);

  void for_each(const std::function<void(const std::string&, Conv2dParams<T>&)>& fn);
  void for_each(
      const std::function<void(const std::string&, const Conv2dParams<T>&)>& fn) const;
  std::size_t num_sites() const;

  /// One TNSR file per tensor: <site>.weight.tnsr and <site>.bias.tnsr.
  void save(const std::filesystem::path& dir) const;
  /// Loads into the existing structure; shapes must match.
  void load(const std::filesystem::path& dir);
};

/// Camera inputs plus the BEV feature map the spatial embedding is added to.
template <typename T>
struct PipelineInputs {
  GridSpec grid;
  std::vector<CameraModel> cameras;
  std::vector<DepthDistribution<T>> depth;
  Tensor<T> bev_features;  // C x nx x ny
};

template <typename T>
struct ForwardState {
  Tensor<T> occ;  // single-channel occupancy, nx x ny x nz
  TpvEmbeddings<T> tpv;
  LtiCache<T> lti;
  Tensor<T> fused;
  HeadCache<T> head;
  Tensor<T> logits;  // nx x ny x nz x L
};

/// GSS -> extract_tpv -> LTI -> fuse -> predict.
template <typename T>
ForwardState<T> pipeline_forward(const PipelineInputs<T>& in,
                                 const PipelineParams<T>& params,
                                 const ModelOptions& opts);

/// Forward from a precomputed occupancy grid (it does not depend on the
/// parameters, so the fit computes it once).
template <typename T>
ForwardState<T> pipeline_forward(const Tensor<T>& occ, const Tensor<T>& bev_features,
                                 const PipelineParams<T>& params,
                                 const ModelOptions& opts);

/// Parameter gradients given dLoss/dLogits.
template <typename T>
PipelineParams<T> pipeline_backward(const ForwardState<T>& state,
                                    const PipelineParams<T>& params,
                                    const ModelOptions& opts,
                                    const Tensor<T>& grad_logits);

template <typename T>
void sgd_step(PipelineParams<T>& params, const PipelineParams<T>& grads, double lr);

struct FitTrace {
  std::vector<double> loss;  // loss before each step, then the final loss
  double lr = 0.0;

  double initial() const { return loss.front(); }
  double final() const { return loss.back(); }
};

/// Plain gradient descent on all parameters against masked cross-entropy.
/// Throws NumericalError with the step index if the loss or a gradient
/// becomes non-finite.
template <typename T>
FitTrace fit(const PipelineInputs<T>& in, PipelineParams<T>& params,
             const ModelOptions& opts, const LabeledOccupancy& labels,
             const VisibilityMask& mask, std::size_t steps, double lr);

}  // namespace tpvocc
