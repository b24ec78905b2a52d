// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "oracles/oracles.hpp"
#include "support.hpp"
#include "tpvocc/bench.hpp"
#include "tpvocc/pipeline.hpp"
#include "tpvocc/synth.hpp"

namespace tpvocc {
namespace {

using testing::random_tensor;

ModelDims tiny_dims(std::size_t bev_layers = 1, std::size_t conv_layers = 1) {
  ModelDims d;
  d.nx = 4;
  d.ny = 3;
  d.nz = 2;
  d.channels = 2;
  d.kernel_size = 3;
  d.conv_layers = conv_layers;
  d.bev_layers = bev_layers;
  return d;
}

struct TinyProblem {
  Tensor<double> occ, bev;
  LabeledOccupancy labels;
  VisibilityMask mask;
};

TinyProblem tiny_problem(const ModelDims& d, Rng& rng) {
  TinyProblem p{random_tensor<double>({d.nx, d.ny, d.nz}, rng, 0.0, 1.0),
                random_tensor<double>({d.channels, d.nx, d.ny}, rng),
                {Labels({d.nx, d.ny, d.nz}), kNumClasses},
                {Labels({d.nx, d.ny, d.nz})}};
  for (auto& v : p.labels.labels.data()) v = static_cast<std::uint8_t>(rng.index(kNumClasses));
  for (auto& v : p.mask.visible.data()) v = rng.bernoulli(0.8);
  p.mask.visible[0] = 1;
  return p;
}

std::map<std::string, Conv2dParams<double>> sites(const PipelineParams<double>& p) {
  std::map<std::string, Conv2dParams<double>> out;
  p.for_each([&](const std::string& n, const Conv2dParams<double>& c) { out[n] = c; });
  return out;
}

TEST(PipelineParams, SiteNames) {
  const auto p = PipelineParams<double>::zeros(tiny_dims(2, 2));
  std::set<std::string> names;
  for (const auto& [n, c] : sites(p)) names.insert(n);
  const std::set<std::string> want{"extract_bev", "extract_bev.1", "extract_fv", "extract_fv.1",
                                   "extract_sv",  "extract_sv.1",  "lti_bev",    "lti_bev.1",
                                   "lti_fv",      "lti_fv.1",      "lti_sv",     "lti_sv.1",
                                   "lti_fuse",    "lti_fuse.1",    "bev",        "bev.1",
                                   "head"};
  EXPECT_EQ(names, want);
  EXPECT_EQ(p.num_sites(), want.size());
  EXPECT_EQ(sites(p).at("head").weight.dim(0), 2 * kNumClasses);
}

TEST(PipelineParams, SaveLoadRoundTrip) {
  Rng rng(1);
  const auto dims = tiny_dims();
  const auto p = PipelineParams<double>::uniform(dims, rng);
  const auto dir = testing::temp_dir("params");
  p.save(dir);
  auto q = PipelineParams<double>::zeros(dims);
  q.load(dir);
  const auto a = sites(p), b = sites(q);
  for (const auto& [n, c] : a) {
    EXPECT_EQ(b.at(n).weight, c.weight) << n;
    EXPECT_EQ(b.at(n).bias, c.bias) << n;
  }
  auto wider = tiny_dims();
  wider.channels = 3;
  auto r = PipelineParams<double>::zeros(wider);
  EXPECT_THROW(r.load(dir), DataError);
  EXPECT_THROW(q.load(dir / "missing"), DataError);
}

TEST(Pipeline, ZeroParamsPredictUniformLogits) {
  Rng rng(2);
  const auto dims = tiny_dims();
  const auto prob = tiny_problem(dims, rng);
  const auto state = pipeline_forward(prob.occ, prob.bev, PipelineParams<double>::zeros(dims),
                                      ModelOptions{});
  EXPECT_EQ(state.logits.shape(), (Shape{4, 3, 2, kNumClasses}));
  for (double v : state.logits.data()) EXPECT_EQ(v, 0.0);
}

TEST(Pipeline, ForwardFromCamerasMatchesPrecomputedOccupancy) {
  Rng rng(3);
  const auto g = GridSpec::from_origin(-1.6, -1.6, -1.0, 0.4, 8, 8, 4);
  ModelDims dims = tiny_dims();
  dims.nx = dims.ny = 8;
  dims.nz = 4;
  PipelineInputs<double> in{g, testing::centre_rig(g), {}, random_tensor<double>({2, 8, 8}, rng)};
  for (const auto& c : in.cameras) {
    in.depth.push_back(
        {random_tensor<double>({16, c.H, c.W}, rng, 0.0, 1.0), DepthBins{0.2, 0.3, 16}});
  }
  const auto p = PipelineParams<double>::uniform(dims, rng);
  const auto a = pipeline_forward(in, p, ModelOptions{});
  const auto occ = global_spatial_sampling<double>(in.depth, in.cameras, g);
  const auto b = pipeline_forward(occ, in.bev_features, p, ModelOptions{});
  EXPECT_EQ(a.occ, occ);
  EXPECT_EQ(a.logits, b.logits);
}

// Central differences of the masked cross-entropy with respect to every
// parameter of every site.
void check_backward(const ModelDims& dims, const ModelOptions& opts, std::uint64_t seed) {
  Rng rng(seed);
  const auto prob = tiny_problem(dims, rng);
  const auto params = PipelineParams<double>::uniform(dims, rng);
  const auto state = pipeline_forward(prob.occ, prob.bev, params, opts);
  const auto loss = cross_entropy(state.logits, prob.labels, prob.mask);
  const auto grads = sites(pipeline_backward(state, params, opts, loss.grad));

  for (const auto& [name, conv] : sites(params)) {
    for (bool bias : {false, true}) {
      const auto eval = [&](const Tensor<double>& value) {
        auto p = params;
        p.for_each([&](const std::string& n, Conv2dParams<double>& c) {
          if (n == name) (bias ? c.bias : c.weight) = value;
        });
        const auto s = pipeline_forward(prob.occ, prob.bev, p, opts);
        return cross_entropy(s.logits, prob.labels, prob.mask).loss;
      };
      const auto& at = bias ? conv.bias : conv.weight;
      const auto fd = oracle::finite_diff(eval, at, 1e-4);
      const auto& g = bias ? grads.at(name).bias : grads.at(name).weight;
      EXPECT_LE(testing::rel_error(g, fd, 1e-8), 1e-5) << name << (bias ? ".bias" : ".weight");
    }
  }
}

TEST(PipelineBackward, FiniteDifferences) { check_backward(tiny_dims(), ModelOptions{}, 4); }

TEST(PipelineBackward, FiniteDifferencesDeepAndSum) {
  ModelOptions opts;
  opts.mean_over_vanished = false;
  check_backward(tiny_dims(2, 2), opts, 5);
}

TEST(PipelineBackward, FiniteDifferencesNoBevStack) {
  check_backward(tiny_dims(0, 1), ModelOptions{}, 6);
}

TEST(SgdStep, MovesAgainstTheGradient) {
  Rng rng(7);
  const auto dims = tiny_dims();
  auto p = PipelineParams<double>::uniform(dims, rng);
  const auto before = sites(p);
  const auto g = PipelineParams<double>::uniform(dims, rng);
  sgd_step(p, g, 0.5);
  const auto gs = sites(g);
  for (const auto& [n, c] : sites(p))
    for (std::size_t i = 0; i < c.weight.size(); ++i)
      EXPECT_DOUBLE_EQ(c.weight[i], before.at(n).weight[i] - 0.5 * gs.at(n).weight[i]);
  EXPECT_THROW(sgd_step(p, PipelineParams<double>::zeros(tiny_dims(2)), 0.1), ShapeError);
}

struct FitProblem {
  PipelineInputs<double> in;
  LabeledOccupancy labels;
  VisibilityMask mask;
  ModelDims dims;
};

FitProblem fit_problem() {
  const auto g = GridSpec::from_origin(-1.6, -1.6, -1.0, 0.4, 8, 8, 4);
  const auto cams = testing::centre_rig(g);
  const auto scene = generate_scene(g, 2, 3);
  const DepthBins bins{0.2, 0.2, 28};
  FitProblem f{{g, cams, {}, Tensor<double>({2, 8, 8})}, scene.labels,
               compute_visibility(scene, cams), tiny_dims()};
  for (const auto& c : cams) {
    f.in.depth.push_back(render_depth_distribution<double>(scene, c, bins, RenderMode::kOneHot));
  }
  f.dims.nx = f.dims.ny = 8;
  f.dims.nz = 4;
  return f;
}

TEST(Fit, ZeroLearningRateIsFlat) {
  auto f = fit_problem();
  Rng rng(8);
  auto p = PipelineParams<double>::uniform(f.dims, rng);
  const auto trace = fit(f.in, p, ModelOptions{}, f.labels, f.mask, 3, 0.0);
  ASSERT_EQ(trace.loss.size(), 4u);
  for (double l : trace.loss) EXPECT_EQ(l, trace.initial());
}

TEST(Fit, SmallStepsDecreaseTheLoss) {
  auto f = fit_problem();
  Rng rng(9);
  const auto init = PipelineParams<double>::uniform(f.dims, rng);
  // Gradient descent decreases the loss for a small enough step; halve until
  // the first step does.
  double lr = 0.05;
  FitTrace trace;
  for (int tries = 0; tries < 10; ++tries, lr /= 2) {
    auto p = init;
    trace = fit(f.in, p, ModelOptions{}, f.labels, f.mask, 10, lr);
    if (trace.loss[1] < trace.loss[0]) break;
  }
  ASSERT_LT(trace.loss[1], trace.loss[0]);
  for (std::size_t s = 1; s < trace.loss.size(); ++s) EXPECT_LT(trace.loss[s], trace.loss[s - 1]);
  EXPECT_EQ(trace.lr, lr);
}

TEST(Fit, NonFiniteLossReportsTheStep) {
  auto f = fit_problem();
  auto p = PipelineParams<double>::zeros(f.dims);
  for (auto& b : p.head.head.bias.data()) b = std::numeric_limits<double>::quiet_NaN();
  try {
    fit(f.in, p, ModelOptions{}, f.labels, f.mask, 2, 0.1);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.step(), 0);
  }
  auto q = PipelineParams<double>::zeros(f.dims);
  EXPECT_THROW(fit(f.in, q, ModelOptions{}, f.labels, f.mask, 0, 0.1), ConfigError);
}

// Direct six-deep loop over the output and the kernel.
Tensor<double> naive_conv3d(const Tensor<double>& x, const Conv3dParams<double>& p) {
  const std::size_t C = p.c_out(), Ci = p.c_in(), k = p.kernel(), r = k / 2;
  const std::size_t X = x.dim(1), Y = x.dim(2), Z = x.dim(3);
  Tensor<double> out({C, X, Y, Z});
  for (std::size_t o = 0; o < C; ++o)
    for (std::size_t i = 0; i < X; ++i)
      for (std::size_t j = 0; j < Y; ++j)
        for (std::size_t l = 0; l < Z; ++l) {
          double acc = p.bias[o];
          for (std::size_t c = 0; c < Ci; ++c)
            for (std::size_t a = 0; a < k; ++a)
              for (std::size_t b = 0; b < k; ++b)
                for (std::size_t e = 0; e < k; ++e) {
                  const long ii = long(i + a) - long(r), jj = long(j + b) - long(r),
                             ll = long(l + e) - long(r);
                  if (ii < 0 || jj < 0 || ll < 0 || ii >= long(X) || jj >= long(Y) ||
                      ll >= long(Z))
                    continue;
                  acc += p.weight[(((o * Ci + c) * k + a) * k + b) * k + e] *
                         x(c, std::size_t(ii), std::size_t(jj), std::size_t(ll));
                }
          out(o, i, j, l) = acc;
        }
  return out;
}

TEST(Conv3d, MatchesDirectLoop) {
  Rng rng(10);
  for (std::size_t k : {1, 3}) {
    const auto x = random_tensor<double>({3, 5, 4, 6}, rng);
    const auto p = Conv3dParams<double>::uniform_init(2, 3, k, rng);
    EXPECT_LE(testing::rel_error(conv3d(x, p), naive_conv3d(x, p)), 1e-12);
  }
  const auto p = Conv3dParams<double>::uniform_init(2, 3, 3, rng);
  EXPECT_THROW(conv3d(Tensor<double>({2, 4, 4, 4}), p), ShapeError);
}

TEST(Bench, Median) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_THROW(median({}), DataError);
}

TEST(Bench, ModesRunOnSmallConfig) {
  auto cfg = PipelineConfig::parse(R"({"grid": {"x_min": -1.6, "x_max": 1.6, "y_min": -1.6,
    "y_max": 1.6, "z_min": -1, "z_max": 0.6, "voxel_size": 0.4, "nx": 8, "ny": 8, "nz": 4},
    "channels": 4})");
  for (const char* name : {"lti", "conv3d_ref", "gss"}) {
    const auto mode = parse_bench_mode(name);
    EXPECT_EQ(to_string(mode), name);
    const auto r = run_bench(cfg, mode, 3);
    EXPECT_EQ(r.repeats, 3u);
    ASSERT_EQ(r.times_ms.size(), 3u);
    EXPECT_EQ(r.median_ms, median(r.times_ms));
    EXPECT_TRUE(r.checksum_stable);
    EXPECT_EQ(run_bench(cfg, mode, 3).checksum, r.checksum);
  }
  EXPECT_THROW(run_bench(cfg, BenchMode::kLti, 2), ConfigError);
  EXPECT_THROW(parse_bench_mode("conv2d"), ConfigError);
}

}  // namespace
}  // namespace tpvocc
