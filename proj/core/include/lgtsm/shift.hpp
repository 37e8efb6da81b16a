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

#include "lgtsm/tensor.hpp"

namespace lgtsm {

enum class ShiftMode : std::uint8_t { fixed_tsm, learnable };

// Channel split for temporal shifting. With C input channels the first
// floor(C*fraction/2) channels form the forward group (frame t reads t-1),
// the next floor(C*fraction/2) the backward group (t reads t+1), and the
// remainder is the static group.
struct ShiftSpec {
  std::int64_t fraction_num = 1;
  std::int64_t fraction_den = 4;
  bool causal = false;
  ShiftMode mode = ShiftMode::learnable;

  void validate() const;
  std::int64_t group_channels(std::int64_t channels) const;
  double fraction() const {
    return static_cast<double>(fraction_num) / static_cast<double>(fraction_den);
  }
};

// Zero-parameter TSM. Shifted-in frames at the sequence ends are zero. In
// causal mode the backward group is passed through unshifted.
Tensor temporal_shift_fixed(const Tensor& x, const ShiftSpec& spec);

enum class KernelGrouping : std::uint8_t {
  per_channel,      // weights [C,K]
  per_shift_group,  // weights [3,K]: forward, backward, static
};

// Learnable 1-D temporal kernels generalizing the fixed shift.
struct LearnableShiftKernels {
  Tensor weights;
  std::int64_t channels = 0;
  std::int64_t forward_channels = 0;  // size of each shifted group
  KernelGrouping grouping = KernelGrouping::per_channel;
  bool trainable = true;

  // Centered-delta kernels (identity shift) for `channels` inputs.
  static LearnableShiftKernels identity(std::int64_t channels, std::int64_t kernel_size,
                                        const ShiftSpec& spec, DType dtype,
                                        KernelGrouping grouping = KernelGrouping::per_channel);

  std::int64_t kernel_size() const { return weights.dim(1); }
  // Trainable scalars contributed by the kernels.
  std::int64_t parameter_count() const { return trainable ? weights.numel() : 0; }
};

// Sets the kernels so that learnable_temporal_shift reproduces
// temporal_shift_fixed exactly: forward channels get a delta one tap before
// center, backward channels one tap after (center in causal mode), static
// channels the centered delta.
void init_tsm_equivalent(LearnableShiftKernels& kernels, const ShiftSpec& spec);

// Depthwise temporal convolution with the (expanded) kernels. In causal mode
// taps that would read future frames are dropped.
Tensor learnable_temporal_shift(const Tensor& x, const LearnableShiftKernels& kernels,
                                bool causal);

// Per-channel [C,K] view of the kernels; differentiable w.r.t. the weights.
Tensor expand_kernels(const LearnableShiftKernels& kernels);

}  // namespace lgtsm
