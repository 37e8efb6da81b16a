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

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lgtsm/adam.hpp"
#include "lgtsm/gated_layer.hpp"
#include "lgtsm/shift.hpp"
#include "lgtsm/spectral_norm.hpp"
#include "lgtsm/tensor.hpp"

namespace lgtsm {

struct GeneratorConfig {
  std::int64_t base_channels = 32;
  std::int64_t input_channels = 4;  // masked RGB + mask
  std::int64_t output_channels = 3;
  std::int64_t kernel = 5;
  std::int64_t shift_kernel = 3;
  ShiftSpec shift;  // learnable, 1/4 of channels, non-causal
  KernelGrouping grouping = KernelGrouping::per_channel;
  ActivationSpec activation;
  bool spectral_norm = true;
  int dilation_a = 2;
  int dilation_b = 4;
  // Three-layer down/up/head chain used for whole-network gradient checks.
  bool mini = false;
};

// One row of the encoder-decoder layer table.
struct LayerSpec {
  std::int64_t in_channels;
  std::int64_t out_channels;
  int dilation;
  Resample resample;
  bool gated;  // false only for the output head
};

// L1 conv, L2 down2, L3 conv, L4 down2, L5 conv, L6 dilated, L7 dilated,
// L8 conv, L9 up2, L10 up2, L11 output head. Channels c, 2c, 4c, mirrored.
std::vector<LayerSpec> generator_layer_table(const GeneratorConfig& cfg);

// Plain convolution layer (discriminator stages and the generator head).
struct ConvLayerParams {
  Tensor w, b;
  int stride = 1;
  int dilation = 1;
  ShiftSpec shift;  // fixed TSM; fraction 0 disables
  bool apply_shift = false;
  ActivationSpec activation{Activation::identity, 0.0};
  bool spectral_norm = true;
  SpectralNormState sn;

  void collect_parameters(const std::string& prefix, std::vector<Parameter>& out) const;
  void collect_buffers(const std::string& prefix, std::vector<Parameter>& out) const;
};

Tensor conv_layer_forward(const Tensor& x, ConvLayerParams& p, bool training);

// Optional per-layer interception of activations: receives the 0-based
// layer index and its output, returns the tensor passed on.
using LayerHook = std::function<Tensor(int, const Tensor&)>;

class Generator {
 public:
  Generator(GeneratorConfig cfg, DType dtype, std::uint64_t seed);

  // masked_video [B,3,L,H,W] (masked pixels already zero), mask [B,1,L,H,W]
  // with 1 = missing. Returns the raw tanh output over all pixels.
  Tensor forward(const Tensor& masked_video, const Tensor& mask, bool training = false,
                 const LayerHook& hook = {});

  std::vector<Parameter> parameters() const;
  std::vector<Parameter> buffers() const;
  std::int64_t layer_count() const { return static_cast<std::int64_t>(gated_.size()) + 1; }
  const GeneratorConfig& config() const { return cfg_; }
  DType dtype() const { return dtype_; }
  std::vector<GatedLayerParams>& gated_layers() { return gated_; }
  ConvLayerParams& head() { return head_; }

 private:
  GeneratorConfig cfg_;
  DType dtype_;
  std::vector<GatedLayerParams> gated_;
  ConvLayerParams head_;
};

struct DiscriminatorConfig {
  std::int64_t base_channels = 32;
  std::int64_t input_channels = 3;
  std::int64_t kernel = 5;
  int stride = 2;
  int layers = 6;
  ShiftSpec shift{1, 4, false, ShiftMode::fixed_tsm};
  ActivationSpec activation;
  bool spectral_norm = true;
};

class Discriminator {
 public:
  Discriminator(DiscriminatorConfig cfg, DType dtype, std::uint64_t seed);

  // video [B,3,L,H,W] -> per-point scores [B,1,L,h,w]; no output squashing.
  Tensor forward(const Tensor& video, bool training = false);

  std::vector<Parameter> parameters() const;
  std::vector<Parameter> buffers() const;
  std::vector<ConvLayerParams>& layers() { return layers_; }
  const DiscriminatorConfig& config() const { return cfg_; }

 private:
  DiscriminatorConfig cfg_;
  std::vector<ConvLayerParams> layers_;
};

// Gated 3D-convolution counterpart of Generator for size and speed
// comparisons. Same layer table with temporal kernel 3 and no shifting; it
// has no backward path.
class Generator3D {
 public:
  Generator3D(GeneratorConfig cfg, DType dtype, std::uint64_t seed);

  Tensor forward(const Tensor& masked_video, const Tensor& mask);

  std::vector<Parameter> parameters() const;
  const GeneratorConfig& config() const { return cfg_; }

 private:
  struct Layer {
    Tensor wf, bf, wg, bg;  // wf/wg [Cout,Cin,3,k,k]; head uses wf/bf only
    int dilation = 1;
    Resample resample = Resample::none;
    bool gated = true;
    SpectralNormState sn_f, sn_g;
  };
  GeneratorConfig cfg_;
  std::vector<Layer> layers_;
};

Generator3D build_3dconv_variant(const GeneratorConfig& cfg, DType dtype, std::uint64_t seed);

enum class Component : std::uint8_t { generator, discriminator };

struct ModelBundle {
  Generator generator;
  Discriminator discriminator;

  ModelBundle(const GeneratorConfig& g, const DiscriminatorConfig& d, DType dtype,
              std::uint64_t seed);

  // Trainable tensors of both networks, names prefixed "generator." and
  // "discriminator.".
  std::vector<Parameter> parameters() const;
  std::vector<Parameter> parameters(Component c) const;
  // Spectral-norm vectors, named "<param>.u".
  std::vector<Parameter> buffers() const;
  // Looks up a parameter or buffer by name; undefined tensor when absent.
  Tensor find(const std::string& name) const;
};

std::int64_t param_count(const ModelBundle& bundle, Component component);

// out = mask * generated + (1 - mask) * video. Mask is [B,1,L,H,W].
Tensor composite_output(const Tensor& generated, const Tensor& video, const Tensor& mask);

}  // namespace lgtsm
