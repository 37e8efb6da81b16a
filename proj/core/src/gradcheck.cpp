// Copyright 2026 The LGTSM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lgtsm/gradcheck.hpp"

#include <cmath>
#include <cstdio>
#include <memory>
#include <random>

#include "lgtsm/dataset.hpp"
#include "lgtsm/errors.hpp"
#include "lgtsm/gated_layer.hpp"
#include "lgtsm/losses.hpp"
#include "lgtsm/maskgen.hpp"
#include "lgtsm/networks.hpp"
#include "lgtsm/ops.hpp"
#include "lgtsm/shift.hpp"
#include "lgtsm/spectral_norm.hpp"
#include "lgtsm/tape.hpp"

namespace lgtsm {

const char* grad_component_name(GradComponent c) {
  switch (c) {
    case GradComponent::all: return "all";
    case GradComponent::ops: return "ops";
    case GradComponent::layer: return "layer";
    case GradComponent::generator: return "generator";
    case GradComponent::losses: return "losses";
  }
  return "?";
}

GradComponent parse_grad_component(const std::string& name) {
  for (auto c : {GradComponent::all, GradComponent::ops, GradComponent::layer,
                 GradComponent::generator, GradComponent::losses}) {
    if (name == grad_component_name(c)) return c;
  }
  throw ShapeError("unknown gradcheck component '" + name +
                   "' (expected all, ops, layer, generator or losses)");
}

bool GradCheckReport::passed() const {
  for (const auto& r : results) {
    if (!r.passed) return false;
  }
  return true;
}

std::vector<std::string> GradCheckReport::failures() const {
  std::vector<std::string> out;
  for (const auto& r : results) {
    if (!r.passed) out.push_back(r.name);
  }
  return out;
}

std::string GradCheckReport::format() const {
  std::string out;
  char line[256];
  for (const auto& r : results) {
    std::snprintf(line, sizeof(line), "%-40s max_rel_err=%.3e coords=%-6lld %s%s%s\n",
                  r.name.c_str(), r.max_rel_err, static_cast<long long>(r.coordinates),
                  r.passed ? "PASS" : "FAIL", r.passed ? "" : " at ",
                  r.passed ? "" : r.worst.c_str());
    out += line;
  }
  std::snprintf(line, sizeof(line), "%zu cases, %zu failed, tolerance %.1e\n", results.size(),
                failures().size(), tolerance);
  out += line;
  return out;
}

namespace {

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

double projected(const Tensor& out, const std::vector<double>& r) {
  double s = 0;
  for (std::int64_t i = 0; i < out.numel(); ++i) s += out.at(i) * r[static_cast<std::size_t>(i)];
  return s;
}

}  // namespace

GradCheckResult check_gradients(const GradCase& c, double tolerance, std::uint64_t seed) {
  GradCheckResult res;
  res.name = c.name;
  for (const auto& x : c.inputs) {
    if (x.defined() && x.dtype() != DType::f64) throw ShapeError("gradcheck " + c.name + ": inputs must be f64");
  }
  std::vector<Tensor> inputs = c.inputs;
  for (auto& x : inputs) {
    if (x.defined()) x.zero_grad();
  }

  // Analytic pass.
  Tensor out;
  std::vector<double> r;
  {
    Tape tape;
    Tensor loss;
    {
      Tape::Recording rec(tape);
      out = c.fn(inputs);
      std::mt19937_64 rng(mix_seed(seed, name_hash(c.name)));
      std::normal_distribution<double> normal(0.0, 1.0);
      r.resize(static_cast<std::size_t>(out.numel()));
      for (auto& v : r) v = normal(rng);
      const Tensor proj = Tensor::from_values(out.shape(), r, DType::f64);
      loss = ops::sum(ops::mul(out, proj));
    }
    if (loss.requires_grad() || tape.tracks(loss)) tape.backward(loss);
  }

  Tape::Paused paused;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor& x = inputs[k];
    if (!x.defined() || !x.requires_grad()) continue;
    const Tensor g = x.grad();
    for (std::int64_t i = 0; i < x.numel(); ++i) {
      const double orig = x.at(i);
      const double h = 1e-6 * std::max(1.0, std::abs(orig));
      x.set(i, orig + h);
      const double fp = projected(c.fn(inputs), r);
      x.set(i, orig - h);
      const double fm = projected(c.fn(inputs), r);
      x.set(i, orig);
      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = g.defined() ? g.at(i) : 0.0;
      const double err = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-3});
      if (err >= res.max_rel_err) {
        res.max_rel_err = err;
        res.worst = "input " + std::to_string(k) + "[" + std::to_string(i) + "]";
      }
      ++res.coordinates;
    }
    x.zero_grad();
  }
  res.passed = std::isfinite(res.max_rel_err) && res.max_rel_err < tolerance;
  return res;
}

GradCheckReport run_gradcheck(const std::vector<GradCase>& cases, double tolerance,
                              std::uint64_t seed) {
  GradCheckReport report;
  report.tolerance = tolerance;
  for (const auto& c : cases) {
    try {
      report.results.push_back(check_gradients(c, tolerance, seed));
    } catch (const std::exception& e) {
      GradCheckResult r;
      r.name = c.name;
      r.max_rel_err = INFINITY;
      r.worst = std::string("exception: ") + e.what();
      report.results.push_back(r);
    }
  }
  return report;
}

namespace {

struct CaseBuilder {
  std::mt19937_64 rng;
  std::vector<GradCase> cases;

  Tensor randn(Shape shape, bool grad = true, double away_from_zero = 0.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor t = Tensor::zeros(std::move(shape), DType::f64);
    for (std::int64_t i = 0; i < t.numel(); ++i) {
      double v = normal(rng);
      if (std::abs(v) < away_from_zero) v += v < 0 ? -away_from_zero : away_from_zero;
      t.set(i, v);
    }
    t.set_requires_grad(grad);
    return t;
  }

  Tensor binary_mask(Shape shape) {
    Tensor t = Tensor::zeros(std::move(shape), DType::f64);
    std::bernoulli_distribution coin(0.4);
    for (std::int64_t i = 0; i < t.numel(); ++i) t.set(i, coin(rng) ? 1.0 : 0.0);
    return t;
  }

  void add(std::string name, GradComponent comp, std::vector<Tensor> inputs,
           std::function<Tensor(const std::vector<Tensor>&)> fn) {
    cases.push_back({std::move(name), comp, std::move(fn), std::move(inputs)});
  }
};

void add_op_cases(CaseBuilder& b) {
  using V = std::vector<Tensor>;
  const auto O = GradComponent::ops;
  auto conv = [&](const std::string& name, Shape x, Shape w, bool bias, ops::Conv2dOptions opt) {
    V in{b.randn(x), b.randn(w)};
    in.push_back(bias ? b.randn({w[0]}) : Tensor());
    b.add(name, O, in, [opt](const V& v) { return ops::conv2d_per_frame(v[0], v[1], v[2], opt); });
  };
  conv("ops.conv2d_per_frame", {1, 3, 2, 5, 5}, {4, 3, 3, 3}, true, {});
  conv("ops.conv2d_per_frame.stride2", {2, 2, 2, 6, 6}, {3, 2, 3, 3}, true, {2, 1, -1});
  conv("ops.conv2d_per_frame.dilation2", {1, 2, 1, 7, 7}, {3, 2, 3, 3}, true, {1, 2, -1});
  conv("ops.conv2d_per_frame.5x5_nobias", {1, 2, 2, 6, 5}, {2, 2, 5, 5}, false, {});
  conv("ops.conv2d_per_frame.1x1", {1, 3, 2, 3, 3}, {2, 3, 1, 1}, true, {});
  for (bool causal : {false, true}) {
    for (std::int64_t K : {3, 5}) {
      b.add("ops.temporal_conv1d_depthwise.K" + std::to_string(K) + (causal ? ".causal" : ""), O,
            {b.randn({2, 3, 4, 2, 3}), b.randn({3, K})},
            [causal](const V& v) { return ops::temporal_conv1d_depthwise(v[0], v[1], causal); });
    }
  }
  for (auto [h, w] : {std::pair<std::int64_t, std::int64_t>{8, 8}, {2, 2}, {5, 3}}) {
    b.add("ops.bilinear_resize." + std::to_string(h) + "x" + std::to_string(w), O,
          {b.randn({1, 2, 2, 4, 4})}, [h, w](const V& v) { return ops::bilinear_resize(v[0], h, w); });
  }
  const Shape s{1, 2, 2, 3, 3};
  b.add("ops.sigmoid", O, {b.randn(s)}, [](const V& v) { return ops::sigmoid(v[0]); });
  b.add("ops.tanh", O, {b.randn(s)}, [](const V& v) { return ops::tanh(v[0]); });
  b.add("ops.relu", O, {b.randn(s, true, 0.05)}, [](const V& v) { return ops::relu(v[0]); });
  b.add("ops.leaky_relu", O, {b.randn(s, true, 0.05)},
        [](const V& v) { return ops::leaky_relu(v[0], 0.2); });
  b.add("ops.abs", O, {b.randn(s, true, 0.05)}, [](const V& v) { return ops::abs(v[0]); });
  b.add("ops.scale", O, {b.randn(s)}, [](const V& v) { return ops::scale(v[0], -1.7); });
  b.add("ops.add_scalar", O, {b.randn(s)}, [](const V& v) { return ops::add_scalar(v[0], 0.3); });
  b.add("ops.add", O, {b.randn(s), b.randn(s)}, [](const V& v) { return ops::add(v[0], v[1]); });
  b.add("ops.sub", O, {b.randn(s), b.randn(s)}, [](const V& v) { return ops::sub(v[0], v[1]); });
  b.add("ops.mul", O, {b.randn(s), b.randn(s)}, [](const V& v) { return ops::mul(v[0], v[1]); });
  b.add("ops.mul.shared_input", O, {b.randn(s)}, [](const V& v) { return ops::mul(v[0], v[0]); });
  b.add("ops.sum", O, {b.randn(s)}, [](const V& v) { return ops::sum(v[0]); });
  b.add("ops.mean", O, {b.randn(s)}, [](const V& v) { return ops::mean(v[0]); });
  b.add("ops.gram_matrix", O, {b.randn({2, 3, 2, 2, 3})},
        [](const V& v) { return ops::gram_matrix(v[0]); });
  b.add("ops.concat_channels", O, {b.randn({1, 2, 2, 2, 2}), b.randn({1, 3, 2, 2, 2})},
        [](const V& v) { return ops::concat_channels(v[0], v[1]); });
  b.add("ops.broadcast_channels", O, {b.randn({2, 1, 2, 2, 2})},
        [](const V& v) { return ops::broadcast_channels(v[0], 3); });

  for (bool causal : {false, true}) {
    ShiftSpec spec;
    spec.causal = causal;
    spec.mode = ShiftMode::fixed_tsm;
    b.add(std::string("ops.temporal_shift_fixed") + (causal ? ".causal" : ""), O,
          {b.randn({2, 8, 3, 2, 2})},
          [spec](const V& v) { return temporal_shift_fixed(v[0], spec); });
  }
  for (auto grouping : {KernelGrouping::per_channel, KernelGrouping::per_shift_group}) {
    for (bool causal : {false, true}) {
      ShiftSpec spec;
      spec.causal = causal;
      auto kernels = std::make_shared<LearnableShiftKernels>(
          LearnableShiftKernels::identity(8, 3, spec, DType::f64, grouping));
      Tensor w = b.randn(kernels->weights.shape());
      kernels->weights = w;
      const std::string g = grouping == KernelGrouping::per_channel ? "per_channel" : "per_group";
      b.add("ops.learnable_temporal_shift." + g + (causal ? ".causal" : ""), O,
            {b.randn({1, 8, 4, 2, 2}), w},
            [kernels, causal](const V& v) { return learnable_temporal_shift(v[0], *kernels, causal); });
      if (!causal) {
        b.add("ops.expand_kernels." + g, O, {w},
              [kernels](const V&) { return expand_kernels(*kernels); });
      }
    }
  }
  {
    auto state = std::make_shared<SpectralNormState>(
        SpectralNormState::create(4, DType::f64, b.rng, 1));
    b.add("ops.spectral_normalize", O, {b.randn({4, 3, 3, 3})},
          [state](const V& v) { return spectral_normalize(v[0], *state, false); });
  }
  b.add("ops.resample.down2", O, {b.randn({1, 2, 2, 6, 4})},
        [](const V& v) { return resample(v[0], Resample::down2); });
  b.add("ops.resample.up2", O, {b.randn({1, 2, 2, 3, 2})},
        [](const V& v) { return resample(v[0], Resample::up2); });
  b.add("ops.apply_activation.leaky_relu", O, {b.randn(s, true, 0.05)},
        [](const V& v) { return apply_activation(v[0], ActivationSpec{}); });
  b.add("ops.composite_output", O, {b.randn(s), b.randn(s), b.binary_mask({1, 1, 2, 3, 3})},
        [](const V& v) { return composite_output(v[0], v[1], v[2]); });
  b.add("ops.apply_mask", O, {b.randn(s), b.binary_mask({1, 1, 2, 3, 3})},
        [](const V& v) { return apply_mask(v[0], v[1]); });
}

void add_layer_cases(CaseBuilder& b) {
  using V = std::vector<Tensor>;
  struct Variant {
    const char* name;
    ShiftMode mode;
    bool causal;
    Resample resample;
    int dilation;
    Shape x;
  };
  const Variant variants[] = {
      {"layer.lgtsm", ShiftMode::learnable, false, Resample::none, 1, {1, 4, 4, 6, 6}},
      {"layer.lgtsm.causal_dilated", ShiftMode::learnable, true, Resample::none, 2, {1, 4, 3, 6, 5}},
      {"layer.lgtsm.down2", ShiftMode::learnable, false, Resample::down2, 1, {1, 4, 3, 8, 6}},
      {"layer.lgtsm.up2", ShiftMode::learnable, false, Resample::up2, 1, {1, 4, 3, 3, 4}},
      {"layer.gtsm.fixed_shift", ShiftMode::fixed_tsm, false, Resample::none, 1, {1, 4, 3, 5, 5}},
  };
  for (const auto& var : variants) {
    GatedLayerParams::Options opt;
    opt.in_channels = 4;
    opt.out_channels = 5;
    opt.kernel = 3;
    opt.shift.mode = var.mode;
    opt.shift.causal = var.causal;
    opt.resample = var.resample;
    opt.dilation = var.dilation;
    auto p = std::make_shared<GatedLayerParams>(GatedLayerParams::create(opt, DType::f64, b.rng));
    if (p->kernels) {
      // Move off the delta initialization so every tap carries gradient.
      for (std::int64_t i = 0; i < p->kernels->weights.numel(); ++i) {
        p->kernels->weights.set(i, p->kernels->weights.at(i) + 0.3 * b.randn({1}, false).item());
      }
    }
    V in{b.randn(var.x)};
    std::vector<Parameter> params;
    p->collect_parameters("p", params);
    for (const auto& prm : params) in.push_back(prm.tensor);
    b.add(var.name, GradComponent::layer, in,
          [p](const V& v) { return lgtsm_layer_forward(v[0], *p, false); });
  }
}

void add_network_cases(CaseBuilder& b, std::uint64_t seed) {
  using V = std::vector<Tensor>;
  for (bool causal : {false, true}) {
    GeneratorConfig cfg;
    cfg.mini = true;
    cfg.base_channels = 4;
    cfg.kernel = 3;
    cfg.shift.causal = causal;
    auto g = std::make_shared<Generator>(cfg, DType::f64, seed + 11);
    const Tensor mask = b.binary_mask({1, 1, 3, 8, 8});
    Tensor video = b.randn({1, 3, 3, 8, 8});
    V in{video, mask};
    for (const auto& p : g->parameters()) in.push_back(p.tensor);
    b.add(std::string("generator.mini") + (causal ? ".causal" : ""), GradComponent::generator, in,
          [g](const V& v) { return g->forward(v[0], v[1], false); });
  }
  {
    DiscriminatorConfig cfg;
    cfg.base_channels = 2;
    auto d = std::make_shared<Discriminator>(cfg, DType::f64, seed + 12);
    V in{b.randn({1, 3, 2, 16, 16})};
    for (const auto& p : d->parameters()) in.push_back(p.tensor);
    b.add("generator.discriminator", GradComponent::generator, in,
          [d](const V& v) { return d->forward(v[0], false); });
  }
}

void add_loss_cases(CaseBuilder& b, std::uint64_t seed) {
  using V = std::vector<Tensor>;
  const auto Lc = GradComponent::losses;
  auto fx = std::make_shared<FeatureExtractor>(
      FeatureExtractor::seeded_random(seed + 13, DType::f64, {3, 4}));
  const Shape s{2, 3, 2, 8, 8};
  auto target = [&] { return b.randn(s, false); };
  b.add("losses.l1", Lc, {b.randn(s), target()},
        [](const V& v) { return l1_loss(v[0], v[1]); });
  b.add("losses.masked_l1", Lc, {b.randn(s), target(), b.binary_mask({2, 1, 2, 8, 8})},
        [](const V& v) { return masked_l1_loss(v[0], v[1], v[2], 6.0); });
  b.add("losses.perceptual", Lc, {b.randn(s), target()},
        [fx](const V& v) { return perceptual_loss(v[0], v[1], *fx); });
  b.add("losses.style", Lc, {b.randn(s), target()},
        [fx](const V& v) { return style_loss(v[0], v[1], *fx); });
  b.add("losses.reconstruction_total", Lc, {b.randn(s), target()}, [fx](const V& v) {
    LossComponents c;
    c.l1 = l1_loss(v[0], v[1]);
    c.perc = perceptual_loss(v[0], v[1], *fx);
    c.style = style_loss(v[0], v[1], *fx);
    return total_loss(c, LossWeights{});
  });
  for (auto sign : {HingeSign::standard, HingeSign::paper}) {
    b.add(std::string("losses.d_hinge.") + (sign == HingeSign::paper ? "paper" : "standard"), Lc,
          {b.randn({2, 1, 2, 2, 2}), b.randn({2, 1, 2, 2, 2})},
          [sign](const V& v) { return d_hinge_loss(v[0], v[1], sign); });
  }
  b.add("losses.g_adv", Lc, {b.randn({2, 1, 2, 2, 2})},
        [](const V& v) { return g_adv_loss(v[0]); });
  b.add("losses.adversarial_total", Lc, {b.randn(s), target()}, [fx](const V& v) {
    LossComponents c;
    c.l1 = l1_loss(v[0], v[1]);
    c.perc = perceptual_loss(v[0], v[1], *fx);
    c.style = style_loss(v[0], v[1], *fx);
    c.adv = g_adv_loss(ops::scale(ops::mean(v[0]), 3.0));
    return total_loss(c, LossWeights{});
  });
}

}  // namespace

std::vector<GradCase> gradcheck_cases(GradComponent component, std::uint64_t seed) {
  CaseBuilder b{std::mt19937_64(seed), {}};
  auto want = [&](GradComponent c) { return component == GradComponent::all || component == c; };
  if (want(GradComponent::ops)) add_op_cases(b);
  if (want(GradComponent::layer)) add_layer_cases(b);
  if (want(GradComponent::generator)) add_network_cases(b, seed);
  if (want(GradComponent::losses)) add_loss_cases(b, seed);
  return std::move(b.cases);
}

}  // namespace lgtsm
