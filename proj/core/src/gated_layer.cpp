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

#include "lgtsm/gated_layer.hpp"

#include <cmath>

#include "lgtsm/ops.hpp"

namespace lgtsm {

Tensor apply_activation(const Tensor& x, const ActivationSpec& act) {
  switch (act.kind) {
    case Activation::identity: return x;
    case Activation::relu: return ops::relu(x);
    case Activation::leaky_relu: return ops::leaky_relu(x, act.slope);
    case Activation::tanh: return ops::tanh(x);
  }
  return x;
}

Tensor resample(const Tensor& x, Resample mode) {
  switch (mode) {
    case Resample::none: return x;
    case Resample::down2: {
      if (x.dim(3) % 2 != 0 || x.dim(4) % 2 != 0) {
        throw ShapeError("down2 resampling needs even spatial dims, got " + shape_str(x.shape()));
      }
      return ops::bilinear_resize(x, x.dim(3) / 2, x.dim(4) / 2);
    }
    case Resample::up2: return ops::bilinear_resize(x, x.dim(3) * 2, x.dim(4) * 2);
  }
  return x;
}

Tensor he_normal(Shape shape, DType dtype, std::mt19937_64& rng, double gain) {
  Tensor w = Tensor::zeros(std::move(shape), dtype);
  const std::int64_t fan_in = w.numel() / w.dim(0);
  std::normal_distribution<double> normal(0.0,
                                          gain * std::sqrt(2.0 / static_cast<double>(fan_in)));
  dispatch(dtype, [&](auto tag) {
    using T = decltype(tag);
    for (T& v : w.data<T>()) v = static_cast<T>(normal(rng));
  });
  return w;
}

GatedLayerParams GatedLayerParams::create(const Options& o, DType dtype, std::mt19937_64& rng) {
  o.shift.validate();
  GatedLayerParams p;
  // The sigmoid gate halves the feature path on average at init; feature
  // weights are drawn twice as wide so activations keep their scale.
  p.wf = he_normal({o.out_channels, o.in_channels, o.kernel, o.kernel}, dtype, rng, 2.0);
  p.wg = he_normal({o.out_channels, o.in_channels, o.kernel, o.kernel}, dtype, rng);
  p.bf = Tensor::zeros({o.out_channels}, dtype);
  p.bg = Tensor::zeros({o.out_channels}, dtype);
  for (Tensor* t : {&p.wf, &p.bf, &p.wg, &p.bg}) t->set_requires_grad(true);
  p.shift = o.shift;
  if (o.shift.mode == ShiftMode::learnable) {
    p.kernels = LearnableShiftKernels::identity(o.in_channels, o.shift_kernel, o.shift, dtype,
                                                o.grouping);
    init_tsm_equivalent(*p.kernels, o.shift);
  }
  p.activation = o.activation;
  p.dilation = o.dilation;
  p.resample = o.resample;
  p.spectral_norm = o.spectral_norm;
  if (o.spectral_norm) {
    p.sn_f = SpectralNormState::create(o.out_channels, dtype, rng);
    p.sn_g = SpectralNormState::create(o.out_channels, dtype, rng);
    p.sn_f.warm_start(p.wf);
    p.sn_g.warm_start(p.wg);
  }
  return p;
}

void GatedLayerParams::collect_parameters(const std::string& prefix,
                                          std::vector<Parameter>& out) const {
  out.push_back({prefix + ".Wf", wf});
  out.push_back({prefix + ".bf", bf});
  out.push_back({prefix + ".Wg", wg});
  out.push_back({prefix + ".bg", bg});
  if (kernels && kernels->trainable) out.push_back({prefix + ".shift", kernels->weights});
}

void GatedLayerParams::collect_buffers(const std::string& prefix,
                                       std::vector<Parameter>& out) const {
  if (!spectral_norm) return;
  out.push_back({prefix + ".Wf.u", sn_f.u});
  out.push_back({prefix + ".Wg.u", sn_g.u});
}

Tensor lgtsm_layer_forward(const Tensor& input, GatedLayerParams& p, bool training) {
  if (input.rank() != 5 || input.dim(1) != p.in_channels()) {
    throw ShapeError("lgtsm_layer_forward: layer expects " + std::to_string(p.in_channels()) +
                     " input channels, got " + shape_str(input.shape()));
  }
  const Tensor x = resample(input, p.resample);

  Tensor shifted = x;
  if (p.shift.mode == ShiftMode::learnable) {
    shifted = learnable_temporal_shift(x, *p.kernels, p.shift.causal);
  } else if (p.shift.group_channels(x.dim(1)) > 0) {
    shifted = temporal_shift_fixed(x, p.shift);
  }

  const Tensor wf = p.spectral_norm ? spectral_normalize(p.wf, p.sn_f, training) : p.wf;
  const Tensor wg = p.spectral_norm ? spectral_normalize(p.wg, p.sn_g, training) : p.wg;
  ops::Conv2dOptions conv;
  conv.dilation = p.dilation;

  const Tensor gating = ops::conv2d_per_frame(x, wg, p.bg, conv);
  const Tensor features = ops::conv2d_per_frame(shifted, wf, p.bf, conv);
  return ops::mul(ops::sigmoid(gating), apply_activation(features, p.activation));
}

}  // namespace lgtsm
