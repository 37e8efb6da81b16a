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
#include <filesystem>
#include <string>
#include <vector>

#include "lgtsm/tensor.hpp"

namespace lgtsm {

// Fixed convolutional feature pyramid backing the perceptual and style
// losses. Each stage is a bias-free strided conv followed by a leaky ReLU
// (slope 1 makes a stage linear). Weights never require gradients.
class FeatureExtractor {
 public:
  struct Stage {
    Tensor weight;  // [Cout,Cin,k,k]
    int stride = 2;
    double slope = 0.2;
  };

  FeatureExtractor() = default;
  explicit FeatureExtractor(std::vector<Stage> stages);

  // Default 3-stage stack: 3->16->32->64 channels, 3x3 kernels, stride 2.
  static FeatureExtractor seeded_random(std::uint64_t seed, DType dtype,
                                        std::vector<std::int64_t> channels = {16, 32, 64});

  // File layout: magic "LGTSMFX1", then per stage four little-endian u32
  // dims (Cout, Cin, kh, kw) followed by Cout*Cin*kh*kw little-endian f32
  // weights, repeated to end of file. Stages use stride 2 and slope 0.2.
  static FeatureExtractor load(const std::filesystem::path& path, DType dtype);
  void save(const std::filesystem::path& path) const;

  // video [B,3,L,H,W] -> one feature tensor [B,Cp,L,Hp,Wp] per stage.
  std::vector<Tensor> features(const Tensor& video) const;

  const std::vector<Stage>& stages() const { return stages_; }
  std::vector<Stage>& stages() { return stages_; }
  DType dtype() const;

 private:
  std::vector<Stage> stages_;
};

// Mean over every element of |O - V|.
Tensor l1_loss(const Tensor& output, const Tensor& target);

// Same, with masked pixels weighted by mask_weight and valid pixels by 1,
// normalized by the total weight. mask is [B,1,L,H,W].
Tensor masked_l1_loss(const Tensor& output, const Tensor& target, const Tensor& mask,
                      double mask_weight);

// sum_t sum_p |Psi_p(O_t) - Psi_p(V_t)|_1 / N_p, N_p the per-frame element
// count of stage p, averaged over the batch.
Tensor perceptual_loss(const Tensor& output, const Tensor& target, const FeatureExtractor& fx);

// sum_t sum_p |G(Psi_p(O_t)) - G(Psi_p(V_t))|_1 / Cp^2 with G the Gram
// matrix normalized by Cp*Hp*Wp, averaged over the batch.
Tensor style_loss(const Tensor& output, const Tensor& target, const FeatureExtractor& fx);

// Features of the target are typically fixed within a step; these overloads
// reuse them.
Tensor perceptual_loss(const std::vector<Tensor>& out_features,
                       const std::vector<Tensor>& target_features);
Tensor style_loss(const std::vector<Tensor>& out_features,
                  const std::vector<Tensor>& target_features);

enum class HingeSign : std::uint8_t {
  standard,  // mean relu(1 - D(real)) + mean relu(1 + D(fake))
  paper,     // mean relu(1 + D(real)) + mean relu(1 - D(fake)), as printed
};

Tensor d_hinge_loss(const Tensor& scores_real, const Tensor& scores_fake,
                    HingeSign sign = HingeSign::standard);

// -mean D(G(z)).
Tensor g_adv_loss(const Tensor& scores_fake);

struct LossWeights {
  double l1 = 1.0;
  double perc = 0.1;
  double style = 10.0;
  double adv = 0.01;

  void validate() const;
};

// Individual terms; undefined tensors are skipped by total_loss.
struct LossComponents {
  Tensor l1, perc, style, adv;
};

Tensor total_loss(const LossComponents& c, const LossWeights& w);

}  // namespace lgtsm
