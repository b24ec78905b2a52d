// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tpvocc/config.hpp"
#include "tpvocc/random.hpp"
#include "tpvocc/tensor.hpp"

namespace tpvocc {

/// Weights C_out x C_in x k x k x k and bias C_out of one 3D convolution.
template <typename T>
struct Conv3dParams {
  Tensor<T> weight;
  Tensor<T> bias;

  std::size_t c_out() const { return weight.dim(0); }
  std::size_t c_in() const { return weight.dim(1); }
  std::size_t kernel() const { return weight.dim(2); }

  static Conv3dParams uniform_init(std::size_t c_out, std::size_t c_in,
                                   std::size_t k, Rng& rng);
};

/// Stride-1 3D cross-correlation with zero "same" padding over a
/// C x nx x ny x nz volume. Dense reference for the voxel pipelines the TPV
/// path replaces.
template <typename T>
Tensor<T> conv3d(const Tensor<T>& input, const Conv3dParams<T>& params);

enum class BenchMode { kLti, kConv3dRef, kGss };

BenchMode parse_bench_mode(const std::string& name);
std::string to_string(BenchMode mode);

struct BenchResult {
  std::string mode;
  std::vector<double> times_ms;  // one per timed repeat
  double median_ms = 0.0;
  std::size_t repeats = 0;
  std::uint64_t checksum = 0;    // of the first timed run's output
  bool checksum_stable = true;   // every repeat reproduced it

  std::string to_json() const;
};

double median(std::vector<double> values);

/// One untimed warm-up, then `repeats` timed runs on seeded inputs sized by
/// the config (grid, channels, kernel size, rig, depth bins).
BenchResult run_bench(const PipelineConfig& cfg, BenchMode mode, std::size_t repeats);

}  // namespace tpvocc
