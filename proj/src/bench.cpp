// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpvocc/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <json.hpp>

#include "tpvocc/pipeline.hpp"
#include "tpvocc/tpv.hpp"
#include "tpvocc/view_sampling.hpp"

namespace tpvocc {

using Index = std::ptrdiff_t;

template <typename T>
Conv3dParams<T> Conv3dParams<T>::uniform_init(std::size_t c_out, std::size_t c_in,
                                              std::size_t k, Rng& rng) {
  Conv3dParams p{Tensor<T>({c_out, c_in, k, k, k}), Tensor<T>({c_out})};
  const double s = 1.0 / std::sqrt(static_cast<double>(c_in * k * k * k));
  for (auto& v : p.weight.data()) v = static_cast<T>(rng.uniform(-s, s));
  return p;
}

template <typename T>
Tensor<T> conv3d(const Tensor<T>& input, const Conv3dParams<T>& params) {
  if (input.rank() != 4 || input.dim(0) != params.c_in()) {
    throw ShapeError("conv3d: input " + shape_str(input.shape()) + " does not have " +
                     std::to_string(params.c_in()) + " channels");
  }
  const std::size_t c_in = params.c_in(), c_out = params.c_out();
  const std::size_t X = input.dim(1), Y = input.dim(2), Z = input.dim(3);
  const auto K = static_cast<Index>(params.kernel());
  const auto pad = static_cast<std::size_t>((K - 1) / 2);
  const std::size_t PY = Y + 2 * pad, PZ = Z + 2 * pad, PX = X + 2 * pad;

  // Zero-padded copy so the inner loops need no bounds checks.
  Tensor<T> padded({c_in, PX, PY, PZ});
  for (std::size_t c = 0; c < c_in; ++c)
    for (std::size_t x = 0; x < X; ++x)
      for (std::size_t y = 0; y < Y; ++y)
        std::copy_n(&input(c, x, y, 0), Z, &padded(c, x + pad, y + pad, pad));

  Tensor<T> out({c_out, X, Y, Z});
  const T* w = params.weight.ptr();
  // Each output row (x fixed) is accumulated over the flattened (y, z) plane
  // with the padded z stride, so every tap is one contiguous axpy; the
  // columns z >= Z are scratch and dropped when copying out.
  const std::size_t row = Y * PZ;
#pragma omp parallel for schedule(static)
  for (std::int64_t co = 0; co < static_cast<std::int64_t>(c_out); ++co) {
    std::vector<T> acc(row);
    for (std::size_t x = 0; x < X; ++x) {
      std::fill(acc.begin(), acc.end(), params.bias[co]);
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        const T* in = padded.ptr() + ci * PX * PY * PZ;
        for (Index kx = 0; kx < K; ++kx)
          for (Index ky = 0; ky < K; ++ky)
            for (Index kz = 0; kz < K; ++kz) {
              const T wv = w[(((co * c_in + ci) * K + kx) * K + ky) * K + kz];
              const T* src = in + ((x + kx) * PY + ky) * PZ + kz;
              for (std::size_t m = 0; m + 2 * pad < row; ++m) acc[m] += wv * src[m];
            }
      }
      T* o = out.ptr() + (co * X + x) * Y * Z;
      for (std::size_t y = 0; y < Y; ++y) std::copy_n(acc.data() + y * PZ, Z, o + y * Z);
    }
  }
  return out;
}

BenchMode parse_bench_mode(const std::string& name) {
  if (name == "lti") return BenchMode::kLti;
  if (name == "conv3d_ref") return BenchMode::kConv3dRef;
  if (name == "gss") return BenchMode::kGss;
  throw ConfigError("unknown bench mode '" + name + "' (lti, conv3d_ref, gss)");
}

std::string to_string(BenchMode mode) {
  switch (mode) {
    case BenchMode::kLti: return "lti";
    case BenchMode::kConv3dRef: return "conv3d_ref";
    case BenchMode::kGss: return "gss";
  }
  return "?";
}

double median(std::vector<double> values) {
  if (values.empty()) throw DataError("median of no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string BenchResult::to_json() const {
  nlohmann::json doc;
  doc["mode"] = mode;
  doc["repeats"] = repeats;
  doc["times_ms"] = times_ms;
  doc["median_ms"] = median_ms;
  doc["checksum"] = checksum;
  doc["checksum_stable"] = checksum_stable;
  return doc.dump(2);
}

namespace {

using Clock = std::chrono::steady_clock;

template <typename T>
Tensor<T> random_occupancy(const GridSpec& g, Rng& rng) {
  Tensor<T> occ({g.nx, g.ny, g.nz});
  for (auto& v : occ.data()) v = static_cast<T>(rng.uniform());
  return occ;
}

template <typename T>
std::function<Tensor<T>()> make_workload(const PipelineConfig& cfg, BenchMode mode) {
  const Rig rig = cfg.rig();
  const GridSpec& g = rig.grid;
  Rng rng(cfg.seed);
  switch (mode) {
    case BenchMode::kLti: {
      const auto dims = ModelDims::from_config(cfg, g);
      auto params = PipelineParams<T>::uniform(dims, rng);
      auto occ = random_occupancy<T>(g, rng);
      const bool mean = cfg.mean_over_vanished;
      return [occ = std::move(occ), p = std::move(params), mean] {
        return lti_interact(extract_tpv(occ, p.extract), p.lti, mean);
      };
    }
    case BenchMode::kConv3dRef: {
      const std::size_t C = cfg.channels;
      std::vector<Conv3dParams<T>> layers;
      layers.push_back(Conv3dParams<T>::uniform_init(C, 1, 3, rng));
      layers.push_back(Conv3dParams<T>::uniform_init(C, C, 3, rng));
      layers.push_back(Conv3dParams<T>::uniform_init(C, C, 3, rng));
      auto occ = random_occupancy<T>(g, rng).reshaped({1, g.nx, g.ny, g.nz});
      return [occ = std::move(occ), layers = std::move(layers)] {
        Tensor<T> x = conv3d(occ, layers[0]);
        x = conv3d(x, layers[1]);
        return conv3d(x, layers[2]);
      };
    }
    case BenchMode::kGss: {
      std::vector<DepthDistribution<T>> dists;
      for (const auto& cam : rig.cameras) {
        Tensor<T> logits({cfg.bins.n_bins, cam.H, cam.W});
        for (auto& v : logits.data()) v = static_cast<T>(rng.uniform(-4.0, 4.0));
        dists.push_back(activate_depth(logits, DepthActivation::kSigmoid, cfg.bins));
      }
      const SamplingMode sampling = cfg.sampling;
      return [dists = std::move(dists), cams = rig.cameras, g, sampling] {
        return global_spatial_sampling<T>(dists, cams, g, sampling);
      };
    }
  }
  throw ConfigError("unknown bench mode");
}

template <typename T>
BenchResult run(const PipelineConfig& cfg, BenchMode mode, std::size_t repeats) {
  const auto work = make_workload<T>(cfg, mode);
  BenchResult r;
  r.mode = to_string(mode);
  r.repeats = repeats;
  (void)work();  // warm-up, not timed
  for (std::size_t i = 0; i < repeats; ++i) {
    const auto t0 = Clock::now();
    const Tensor<T> out = work();
    const auto t1 = Clock::now();
    r.times_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    const std::uint64_t sum = checksum(out);
    if (i == 0) {
      r.checksum = sum;
    } else if (sum != r.checksum) {
      r.checksum_stable = false;
    }
  }
  r.median_ms = median(r.times_ms);
  return r;
}

}  // namespace

BenchResult run_bench(const PipelineConfig& cfg, BenchMode mode, std::size_t repeats) {
  if (repeats < 3) throw ConfigError("bench needs at least 3 repeats");
  return cfg.precision == Precision::kF64 ? run<double>(cfg, mode, repeats)
                                          : run<float>(cfg, mode, repeats);
}

template struct Conv3dParams<float>;
template struct Conv3dParams<double>;
template Tensor<float> conv3d(const Tensor<float>&, const Conv3dParams<float>&);
template Tensor<double> conv3d(const Tensor<double>&, const Conv3dParams<double>&);

}  // namespace tpvocc
