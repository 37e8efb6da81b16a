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

#include "lgtsm/networks.hpp"

#include <algorithm>

#include "lgtsm/ops.hpp"
#include "lgtsm/tape.hpp"

namespace lgtsm {

std::vector<LayerSpec> generator_layer_table(const GeneratorConfig& cfg) {
  const std::int64_t c = cfg.base_channels;
  const std::int64_t in = cfg.input_channels;
  const std::int64_t out = cfg.output_channels;
  if (cfg.mini) {
    return {
        {in, c, 1, Resample::down2, true},
        {c, c, 1, Resample::up2, true},
        {c, out, 1, Resample::none, false},
    };
  }
  return {
      {in, c, 1, Resample::none, true},                          // L1
      {c, 2 * c, 1, Resample::down2, true},                      // L2
      {2 * c, 2 * c, 1, Resample::none, true},                   // L3
      {2 * c, 4 * c, 1, Resample::down2, true},                  // L4
      {4 * c, 4 * c, 1, Resample::none, true},                   // L5
      {4 * c, 4 * c, cfg.dilation_a, Resample::none, true},      // L6
      {4 * c, 4 * c, cfg.dilation_b, Resample::none, true},      // L7
      {4 * c, 4 * c, 1, Resample::none, true},                   // L8
      {4 * c, 2 * c, 1, Resample::up2, true},                    // L9
      {2 * c, c, 1, Resample::up2, true},                        // L10
      {c, out, 1, Resample::none, false},                        // L11
  };
}

void ConvLayerParams::collect_parameters(const std::string& prefix,
                                         std::vector<Parameter>& out) const {
  out.push_back({prefix + ".W", w});
  out.push_back({prefix + ".b", b});
}

void ConvLayerParams::collect_buffers(const std::string& prefix,
                                      std::vector<Parameter>& out) const {
  if (spectral_norm) out.push_back({prefix + ".W.u", sn.u});
}

Tensor conv_layer_forward(const Tensor& x, ConvLayerParams& p, bool training) {
  Tensor in = x;
  if (p.apply_shift && p.shift.group_channels(x.dim(1)) > 0) in = temporal_shift_fixed(x, p.shift);
  const Tensor w = p.spectral_norm ? spectral_normalize(p.w, p.sn, training) : p.w;
  ops::Conv2dOptions conv;
  conv.stride = p.stride;
  conv.dilation = p.dilation;
  return apply_activation(ops::conv2d_per_frame(in, w, p.b, conv), p.activation);
}

namespace {

ConvLayerParams make_conv_layer(std::int64_t cin, std::int64_t cout, std::int64_t k,
                                bool spectral_norm, DType dtype, std::mt19937_64& rng) {
  ConvLayerParams p;
  p.w = he_normal({cout, cin, k, k}, dtype, rng);
  p.b = Tensor::zeros({cout}, dtype);
  p.w.set_requires_grad(true);
  p.b.set_requires_grad(true);
  p.spectral_norm = spectral_norm;
  if (spectral_norm) {
    p.sn = SpectralNormState::create(cout, dtype, rng);
    p.sn.warm_start(p.w);
  }
  return p;
}

std::string layer_name(const char* net, std::size_t index) {
  return std::string(net) + ".layer" + std::to_string(index + 1);
}

void check_video_inputs(const Tensor& masked_video, const Tensor& mask, std::int64_t multiple) {
  if (masked_video.rank() != 5 || masked_video.dim(1) != 3) {
    throw ShapeError("generator: masked video must be [B,3,L,H,W], got " +
                     shape_str(masked_video.shape()));
  }
  if (mask.rank() != 5 || mask.dim(1) != 1 || mask.dim(0) != masked_video.dim(0) ||
      mask.dim(2) != masked_video.dim(2) || mask.dim(3) != masked_video.dim(3) ||
      mask.dim(4) != masked_video.dim(4)) {
    throw ShapeError("generator: mask must be [B,1,L,H,W] matching the video, got " +
                     shape_str(mask.shape()));
  }
  if (masked_video.dim(3) % multiple != 0 || masked_video.dim(4) % multiple != 0) {
    throw ShapeError("generator: height and width must be multiples of " +
                     std::to_string(multiple) + ", got " + std::to_string(masked_video.dim(3)) +
                     "x" + std::to_string(masked_video.dim(4)));
  }
}

}  // namespace

Generator::Generator(GeneratorConfig cfg, DType dtype, std::uint64_t seed)
    : cfg_(std::move(cfg)), dtype_(dtype) {
  std::mt19937_64 rng(seed);
  const auto table = generator_layer_table(cfg_);
  for (const auto& spec : table) {
    if (!spec.gated) {
      head_ = make_conv_layer(spec.in_channels, spec.out_channels, cfg_.kernel,
                              cfg_.spectral_norm, dtype, rng);
      head_.activation = {Activation::tanh, 0.0};
      continue;
    }
    GatedLayerParams::Options o;
    o.in_channels = spec.in_channels;
    o.out_channels = spec.out_channels;
    o.kernel = cfg_.kernel;
    o.shift_kernel = cfg_.shift_kernel;
    o.shift = cfg_.shift;
    o.activation = cfg_.activation;
    o.dilation = spec.dilation;
    o.resample = spec.resample;
    o.spectral_norm = cfg_.spectral_norm;
    o.grouping = cfg_.grouping;
    gated_.push_back(GatedLayerParams::create(o, dtype, rng));
  }
}

Tensor Generator::forward(const Tensor& masked_video, const Tensor& mask, bool training,
                          const LayerHook& hook) {
  check_video_inputs(masked_video, mask, cfg_.mini ? 2 : 4);
  Tensor x = ops::concat_channels(masked_video, mask);
  int index = 0;
  for (auto& layer : gated_) {
    x = lgtsm_layer_forward(x, layer, training);
    if (hook) x = hook(index, x);
    ++index;
  }
  x = conv_layer_forward(x, head_, training);
  if (hook) x = hook(index, x);
  return x;
}

std::vector<Parameter> Generator::parameters() const {
  std::vector<Parameter> out;
  for (std::size_t i = 0; i < gated_.size(); ++i) {
    gated_[i].collect_parameters(layer_name("generator", i), out);
  }
  head_.collect_parameters(layer_name("generator", gated_.size()), out);
  return out;
}

std::vector<Parameter> Generator::buffers() const {
  std::vector<Parameter> out;
  for (std::size_t i = 0; i < gated_.size(); ++i) {
    gated_[i].collect_buffers(layer_name("generator", i), out);
  }
  head_.collect_buffers(layer_name("generator", gated_.size()), out);
  return out;
}

Discriminator::Discriminator(DiscriminatorConfig cfg, DType dtype, std::uint64_t seed)
    : cfg_(std::move(cfg)) {
  std::mt19937_64 rng(seed);
  const std::int64_t c = cfg_.base_channels;
  std::int64_t in = cfg_.input_channels;
  for (int i = 0; i < cfg_.layers; ++i) {
    const bool last = i == cfg_.layers - 1;
    const std::int64_t out = last ? 1 : c * (std::int64_t{1} << std::min(i, 2));
    ConvLayerParams p = make_conv_layer(in, out, cfg_.kernel, cfg_.spectral_norm, dtype, rng);
    p.stride = cfg_.stride;
    p.shift = cfg_.shift;
    p.apply_shift = true;
    p.activation = last ? ActivationSpec{Activation::identity, 0.0} : cfg_.activation;
    layers_.push_back(std::move(p));
    in = out;
  }
}

Tensor Discriminator::forward(const Tensor& video, bool training) {
  if (video.rank() != 5 || video.dim(1) != cfg_.input_channels) {
    throw ShapeError("discriminator: expected [B," + std::to_string(cfg_.input_channels) +
                     ",L,H,W], got " + shape_str(video.shape()));
  }
  Tensor x = video;
  for (auto& layer : layers_) x = conv_layer_forward(x, layer, training);
  return x;
}

std::vector<Parameter> Discriminator::parameters() const {
  std::vector<Parameter> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect_parameters(layer_name("discriminator", i), out);
  }
  return out;
}

std::vector<Parameter> Discriminator::buffers() const {
  std::vector<Parameter> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect_buffers(layer_name("discriminator", i), out);
  }
  return out;
}

Generator3D::Generator3D(GeneratorConfig cfg, DType dtype, std::uint64_t seed)
    : cfg_(std::move(cfg)) {
  std::mt19937_64 rng(seed);
  const std::int64_t k = cfg_.kernel;
  for (const auto& spec : generator_layer_table(cfg_)) {
    Layer layer;
    // Same gated-path gain as the 2D layers; the ungated head keeps gain 1.
    layer.wf = he_normal({spec.out_channels, spec.in_channels, 3, k, k}, dtype, rng,
                         spec.gated ? 2.0 : 1.0);
    layer.bf = Tensor::zeros({spec.out_channels}, dtype);
    if (spec.gated) {
      layer.wg = he_normal({spec.out_channels, spec.in_channels, 3, k, k}, dtype, rng);
      layer.bg = Tensor::zeros({spec.out_channels}, dtype);
    }
    layer.dilation = spec.dilation;
    layer.resample = spec.resample;
    layer.gated = spec.gated;
    if (cfg_.spectral_norm) {
      layer.sn_f = SpectralNormState::create(spec.out_channels, dtype, rng);
      layer.sn_f.warm_start(layer.wf);
      if (spec.gated) {
        layer.sn_g = SpectralNormState::create(spec.out_channels, dtype, rng);
        layer.sn_g.warm_start(layer.wg);
      }
    }
    layers_.push_back(std::move(layer));
  }
}

Tensor Generator3D::forward(const Tensor& masked_video, const Tensor& mask) {
  check_video_inputs(masked_video, mask, cfg_.mini ? 2 : 4);
  Tape::Paused no_tape;
  Tensor x = ops::concat_channels(masked_video, mask);
  for (auto& layer : layers_) {
    x = resample(x, layer.resample);
    ops::Conv2dOptions conv;
    conv.dilation = layer.dilation;
    const Tensor wf = cfg_.spectral_norm ? spectral_normalize(layer.wf, layer.sn_f, false) : layer.wf;
    const Tensor features = ops::conv3d_forward(x, wf, layer.bf, conv);
    if (!layer.gated) {
      x = ops::tanh(features);
      continue;
    }
    const Tensor wg = cfg_.spectral_norm ? spectral_normalize(layer.wg, layer.sn_g, false) : layer.wg;
    const Tensor gating = ops::conv3d_forward(x, wg, layer.bg, conv);
    x = ops::mul(ops::sigmoid(gating), apply_activation(features, cfg_.activation));
  }
  return x;
}

std::vector<Parameter> Generator3D::parameters() const {
  std::vector<Parameter> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string prefix = layer_name("generator3d", i);
    if (layers_[i].gated) {
      out.push_back({prefix + ".Wf", layers_[i].wf});
      out.push_back({prefix + ".bf", layers_[i].bf});
      out.push_back({prefix + ".Wg", layers_[i].wg});
      out.push_back({prefix + ".bg", layers_[i].bg});
    } else {
      out.push_back({prefix + ".W", layers_[i].wf});
      out.push_back({prefix + ".b", layers_[i].bf});
    }
  }
  return out;
}

Generator3D build_3dconv_variant(const GeneratorConfig& cfg, DType dtype, std::uint64_t seed) {
  return Generator3D(cfg, dtype, seed);
}

ModelBundle::ModelBundle(const GeneratorConfig& g, const DiscriminatorConfig& d, DType dtype,
                         std::uint64_t seed)
    : generator(g, dtype, seed), discriminator(d, dtype, seed ^ 0x9e3779b97f4a7c15ULL) {}

std::vector<Parameter> ModelBundle::parameters(Component c) const {
  return c == Component::generator ? generator.parameters() : discriminator.parameters();
}

std::vector<Parameter> ModelBundle::parameters() const {
  auto out = generator.parameters();
  auto d = discriminator.parameters();
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

std::vector<Parameter> ModelBundle::buffers() const {
  auto out = generator.buffers();
  auto d = discriminator.buffers();
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

Tensor ModelBundle::find(const std::string& name) const {
  for (const auto& p : parameters()) {
    if (p.name == name) return p.tensor;
  }
  for (const auto& p : buffers()) {
    if (p.name == name) return p.tensor;
  }
  return Tensor();
}

std::int64_t param_count(const ModelBundle& bundle, Component component) {
  const auto params = bundle.parameters(component);
  return count_scalars(params);
}

Tensor composite_output(const Tensor& generated, const Tensor& video, const Tensor& mask) {
  check_same_shape(generated, video, "composite_output");
  const Tensor m = ops::broadcast_channels(mask, video.dim(1));
  const Tensor keep = ops::add_scalar(ops::scale(m, -1.0), 1.0);
  return ops::add(ops::mul(m, generated), ops::mul(keep, video));
}

}  // namespace lgtsm
