// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpvocc/pipeline.hpp"

#include <cmath>

#include "tpvocc/io.hpp"

namespace tpvocc {

ModelDims ModelDims::from_config(const PipelineConfig& cfg, const GridSpec& grid) {
  ModelDims d;
  d.nx = grid.nx;
  d.ny = grid.ny;
  d.nz = grid.nz;
  d.channels = cfg.channels;
  d.kernel_size = cfg.kernel_size;
  d.conv_layers = cfg.conv_layers;
  d.bev_layers = cfg.bev_layers;
  d.num_classes = cfg.num_classes;
  return d;
}

ModelOptions ModelOptions::from_config(const PipelineConfig& cfg) {
  return {cfg.mean_over_vanished, cfg.sampling, cfg.num_classes};
}

namespace {

template <typename T, typename Make>
ConvStack<T> make_stack(std::size_t c_in, std::size_t c_out, std::size_t layers,
                        Make&& make) {
  ConvStack<T> s;
  for (std::size_t l = 0; l < layers; ++l) s.push_back(make(c_out, l == 0 ? c_in : c_out));
  return s;
}

template <typename T, typename Make>
PipelineParams<T> build(const ModelDims& d, Make&& make) {
  const std::size_t C = d.channels, n = d.conv_layers;
  PipelineParams<T> p;
  // Order matters for seeded initialization: it fixes the draw sequence.
  p.extract.bev = make_stack<T>(d.nz, C, n, make);
  p.extract.fv = make_stack<T>(d.nx, C, n, make);
  p.extract.sv = make_stack<T>(d.ny, C, n, make);
  p.lti.bev = make_stack<T>(C, C, n, make);
  p.lti.fv = make_stack<T>(C, C, n, make);
  p.lti.sv = make_stack<T>(C, C, n, make);
  p.lti.fuse = make_stack<T>(C, C, n, make);
  p.head.bev = make_stack<T>(C, C, d.bev_layers, make);
  p.head.head = make(d.nz * d.num_classes, C);
  return p;
}

std::string layer_name(const std::string& site, std::size_t l) {
  return l == 0 ? site : site + "." + std::to_string(l);
}

template <typename P, typename Fn>
void visit_sites(P& p, Fn&& fn) {
  auto stack = [&](const std::string& site, auto& s) {
    for (std::size_t l = 0; l < s.size(); ++l) fn(layer_name(site, l), s[l]);
  };
  stack("extract_bev", p.extract.bev);
  stack("extract_fv", p.extract.fv);
  stack("extract_sv", p.extract.sv);
  stack("lti_bev", p.lti.bev);
  stack("lti_fv", p.lti.fv);
  stack("lti_sv", p.lti.sv);
  stack("lti_fuse", p.lti.fuse);
  stack("bev", p.head.bev);
  fn(std::string("head"), p.head.head);
}

template <typename T>
Conv2dParams<T> as_params(Conv2dGrads<T>&& g) {
  return {std::move(g.weight), std::move(g.bias)};
}

template <typename T>
ConvStack<T> as_stack(std::vector<Conv2dGrads<T>>&& gs) {
  ConvStack<T> s;
  for (auto& g : gs) s.push_back(as_params(std::move(g)));
  return s;
}

}  // namespace

template <typename T>
PipelineParams<T> PipelineParams<T>::uniform(const ModelDims& dims, Rng& rng) {
  return build<T>(dims, [&](std::size_t c_out, std::size_t c_in) {
    return Conv2dParams<T>::uniform_init(c_out, c_in, dims.kernel_size, rng);
  });
}

template <typename T>
PipelineParams<T> PipelineParams<T>::zeros(const ModelDims& dims) {
  return build<T>(dims, [&](std::size_t c_out, std::size_t c_in) {
    return Conv2dParams<T>::zeros(c_out, c_in, dims.kernel_size);
  });
}

template <typename T>
PipelineParams<T> PipelineParams<T>::zeros_like(const PipelineParams& like) {
  PipelineParams out = like;
  out.for_each([](const std::string&, Conv2dParams<T>& p) {
    p.weight.fill(T(0));
    p.bias.fill(T(0));
  });
  return out;
}

template <typename T>
void PipelineParams<T>::for_each(
    const std::function<void(const std::string&, Conv2dParams<T>&)>& fn) {
  visit_sites(*this, fn);
}

template <typename T>
void PipelineParams<T>::for_each(
    const std::function<void(const std::string&, const Conv2dParams<T>&)>& fn) const {
  visit_sites(*this, fn);
}

template <typename T>
std::size_t PipelineParams<T>::num_sites() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Conv2dParams<T>&) { ++n; });
  return n;
}

template <typename T>
void PipelineParams<T>::save(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  for_each([&](const std::string& name, const Conv2dParams<T>& p) {
    write_tnsr(dir / (name + ".weight.tnsr"), p.weight);
    write_tnsr(dir / (name + ".bias.tnsr"), p.bias);
  });
}

template <typename T>
void PipelineParams<T>::load(const std::filesystem::path& dir) {
  for_each([&](const std::string& name, Conv2dParams<T>& p) {
    auto w = read_tnsr_as<T>(dir / (name + ".weight.tnsr"));
    auto b = read_tnsr_as<T>(dir / (name + ".bias.tnsr"));
    if (w.shape() != p.weight.shape() || b.shape() != p.bias.shape()) {
      throw DataError("parameter " + name + " has shape " + shape_str(w.shape()) +
                      ", expected " + shape_str(p.weight.shape()));
    }
    p.weight = std::move(w);
    p.bias = std::move(b);
  });
}

template <typename T>
ForwardState<T> pipeline_forward(const Tensor<T>& occ, const Tensor<T>& bev_features,
                                 const PipelineParams<T>& params,
                                 const ModelOptions& opts) {
  ForwardState<T> s;
  s.occ = occ;
  s.tpv = extract_tpv(occ, params.extract);
  s.lti = lti_forward(s.tpv, params.lti, opts.mean_over_vanished);
  s.fused = fuse(bev_features, s.lti.spatial());
  s.logits = predict_forward(s.fused, params.head, opts.num_classes, s.head);
  return s;
}

template <typename T>
ForwardState<T> pipeline_forward(const PipelineInputs<T>& in,
                                 const PipelineParams<T>& params,
                                 const ModelOptions& opts) {
  const auto occ = global_spatial_sampling<T>(in.depth, in.cameras, in.grid, opts.sampling);
  return pipeline_forward(occ, in.bev_features, params, opts);
}

template <typename T>
PipelineParams<T> pipeline_backward(const ForwardState<T>& state,
                                    const PipelineParams<T>& params,
                                    const ModelOptions& opts,
                                    const Tensor<T>& grad_logits) {
  auto head = predict_backward(params.head, state.head, grad_logits);
  // fused = F_BEV + E_S, so E_S receives the fused gradient unchanged.
  auto lti = lti_backward(state.tpv, params.lti, opts.mean_over_vanished, state.lti,
                          head.fused);
  auto ext = extract_tpv_backward(state.occ, params.extract, lti.inputs);

  PipelineParams<T> g;
  g.extract.bev = as_stack(std::move(ext.bev));
  g.extract.fv = as_stack(std::move(ext.fv));
  g.extract.sv = as_stack(std::move(ext.sv));
  g.lti.bev = as_stack(std::move(lti.bev));
  g.lti.fv = as_stack(std::move(lti.fv));
  g.lti.sv = as_stack(std::move(lti.sv));
  g.lti.fuse = as_stack(std::move(lti.fuse));
  g.head.bev = as_stack(std::move(head.bev));
  g.head.head = as_params(std::move(head.head));
  return g;
}

template <typename T>
void sgd_step(PipelineParams<T>& params, const PipelineParams<T>& grads, double lr) {
  std::vector<const Conv2dParams<T>*> flat;
  grads.for_each([&](const std::string&, const Conv2dParams<T>& g) { flat.push_back(&g); });
  std::size_t i = 0;
  params.for_each([&](const std::string& name, Conv2dParams<T>& p) {
    if (i >= flat.size()) throw ShapeError("sgd_step: gradient set is missing " + name);
    sgd_step(p.weight, flat[i]->weight, lr);
    sgd_step(p.bias, flat[i]->bias, lr);
    ++i;
  });
  if (i != flat.size()) throw ShapeError("sgd_step: gradient set has extra sites");
}

namespace {

template <typename T>
bool grads_finite(const PipelineParams<T>& g) {
  bool ok = true;
  g.for_each([&](const std::string&, const Conv2dParams<T>& p) {
    ok = ok && all_finite(p.weight) && all_finite(p.bias);
  });
  return ok;
}

}  // namespace

template <typename T>
FitTrace fit(const PipelineInputs<T>& in, PipelineParams<T>& params,
             const ModelOptions& opts, const LabeledOccupancy& labels,
             const VisibilityMask& mask, std::size_t steps, double lr) {
  if (steps < 1) throw ConfigError("fit needs at least one step");
  const auto occ = global_spatial_sampling<T>(in.depth, in.cameras, in.grid, opts.sampling);
  FitTrace trace;
  trace.lr = lr;
  for (std::size_t step = 0; step <= steps; ++step) {
    const auto state = pipeline_forward(occ, in.bev_features, params, opts);
    auto loss = cross_entropy(state.logits, labels, mask);
    if (!std::isfinite(loss.loss)) {
      throw NumericalError("non-finite loss at step " + std::to_string(step),
                           static_cast<int>(step));
    }
    trace.loss.push_back(loss.loss);
    if (step == steps) break;
    const auto grads = pipeline_backward(state, params, opts, loss.grad);
    if (!grads_finite(grads)) {
      throw NumericalError("non-finite gradient at step " + std::to_string(step),
                           static_cast<int>(step));
    }
    sgd_step(params, grads, lr);
  }
  return trace;
}

#define TPVOCC_INSTANTIATE(T)                                                     \
  template struct PipelineParams<T>;                                              \
  template ForwardState<T> pipeline_forward(const PipelineInputs<T>&,             \
                                            const PipelineParams<T>&,             \
                                            const ModelOptions&);                 \
  template ForwardState<T> pipeline_forward(const Tensor<T>&, const Tensor<T>&,   \
                                            const PipelineParams<T>&,             \
                                            const ModelOptions&);                 \
  template PipelineParams<T> pipeline_backward(const ForwardState<T>&,            \
                                               const PipelineParams<T>&,          \
                                               const ModelOptions&,               \
                                               const Tensor<T>&);                 \
  template void sgd_step(PipelineParams<T>&, const PipelineParams<T>&, double);   \
  template FitTrace fit(const PipelineInputs<T>&, PipelineParams<T>&,             \
                        const ModelOptions&, const LabeledOccupancy&,             \
                        const VisibilityMask&, std::size_t, double);

TPVOCC_INSTANTIATE(float)
TPVOCC_INSTANTIATE(double)
#undef TPVOCC_INSTANTIATE

}  // namespace tpvocc
