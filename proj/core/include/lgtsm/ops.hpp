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

#include "lgtsm/tensor.hpp"

// Differentiable kernels over [B,C,L,H,W] tensors. Every op records a
// backward rule on the active Tape when one of its inputs is tracked.
namespace lgtsm::ops {

struct Conv2dOptions {
  int stride = 1;
  int dilation = 1;
  // Symmetric zero padding; kSamePadding selects dilation*(k-1)/2, which
  // yields ceil(H/stride) outputs for odd kernels.
  int padding = kSamePadding;

  static constexpr int kSamePadding = -1;
};

// Each frame is convolved independently: w is [Cout,Cin,kh,kw], bias is
// [Cout] or undefined.
Tensor conv2d_per_frame(const Tensor& x, const Tensor& w, const Tensor& bias,
                        const Conv2dOptions& options = {});

// Full spatio-temporal convolution with w [Cout,Cin,kt,kh,kw], temporal
// zero padding (kt-1)/2 and temporal stride 1. Inference only: it records no
// backward rule and refuses tracked inputs while a tape is recording.
Tensor conv3d_forward(const Tensor& x, const Tensor& w, const Tensor& bias,
                      const Conv2dOptions& spatial = {});

// out[b,c,t] = sum_j k[c,j] * x[b,c,t+j-(K-1)/2], frames outside [0,L) are
// zero. With causal=true the taps j > (K-1)/2 (future frames) are skipped and
// receive no gradient.
Tensor temporal_conv1d_depthwise(const Tensor& x, const Tensor& k, bool causal = false);

// Per-frame bilinear resampling with half-pixel centers (align_corners off).
Tensor bilinear_resize(const Tensor& x, std::int64_t out_h, std::int64_t out_w);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor abs(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// Scalar (shape []) reductions over all elements.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// feat [B,C,L,H,W] -> [B,L,C,C], G = F F^T / (C*H*W) per batch item and frame.
Tensor gram_matrix(const Tensor& feat);

// Concatenates along the channel axis.
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Repeats a single-channel [B,1,L,H,W] tensor to [B,channels,L,H,W].
Tensor broadcast_channels(const Tensor& x, std::int64_t channels);

}  // namespace lgtsm::ops
