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

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lgtsm/adam.hpp"
#include "lgtsm/shift.hpp"
#include "lgtsm/spectral_norm.hpp"
#include "lgtsm/tensor.hpp"

namespace lgtsm {

enum class Activation : std::uint8_t { identity, relu, leaky_relu, tanh };

struct ActivationSpec {
  Activation kind = Activation::leaky_relu;
  double slope = 0.2;
};

Tensor apply_activation(const Tensor& x, const ActivationSpec& act);

enum class Resample : std::uint8_t { none, down2, up2 };

// Bilinear x0.5 / x2 resampling of the spatial axes; identity for none.
Tensor resample(const Tensor& x, Resample mode);

// One gated temporal-shift layer:
//   gating   = conv(Wg, x)
//   features = conv(Wf, shift(x))
//   out      = sigmoid(gating) * phi(features)
// The gating path always sees the unshifted input.
struct GatedLayerParams {
  Tensor wf, bf, wg, bg;  // [Cout,Cin,k,k] and [Cout]
  ShiftSpec shift;
  std::optional<LearnableShiftKernels> kernels;  // present iff shift.mode == learnable
  ActivationSpec activation;
  int dilation = 1;
  Resample resample = Resample::none;
  bool spectral_norm = true;
  SpectralNormState sn_f, sn_g;

  std::int64_t in_channels() const { return wf.dim(1); }
  std::int64_t out_channels() const { return wf.dim(0); }

  struct Options {
    std::int64_t in_channels = 0;
    std::int64_t out_channels = 0;
    std::int64_t kernel = 3;
    std::int64_t shift_kernel = 3;
    ShiftSpec shift;
    ActivationSpec activation;
    int dilation = 1;
    Resample resample = Resample::none;
    bool spectral_norm = true;
    KernelGrouping grouping = KernelGrouping::per_channel;
  };

  // He-normal weights, zero biases, TSM-equivalent shift kernels.
  static GatedLayerParams create(const Options& options, DType dtype, std::mt19937_64& rng);

  // Appends trainable tensors as prefix.Wf, prefix.bf, prefix.Wg, prefix.bg,
  // prefix.shift.
  void collect_parameters(const std::string& prefix, std::vector<Parameter>& out) const;
  // Appends spectral-norm vectors as prefix.Wf.u, prefix.Wg.u.
  void collect_buffers(const std::string& prefix, std::vector<Parameter>& out) const;
};

// training=true advances the spectral-norm power iteration.
Tensor lgtsm_layer_forward(const Tensor& x, GatedLayerParams& p, bool training);

// He-normal initialized [Cout,Cin,kh,kw] weight.
Tensor he_normal(Shape shape, DType dtype, std::mt19937_64& rng, double gain = 1.0);

}  // namespace lgtsm
