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

#include "lgtsm/shift.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include "lgtsm/ops.hpp"
#include "lgtsm/tape.hpp"

namespace lgtsm {

void ShiftSpec::validate() const {
  if (fraction_den <= 0 || fraction_num < 0 || fraction_num > fraction_den) {
    throw ShapeError("shift fraction must lie in [0,1], got " + std::to_string(fraction_num) +
                     "/" + std::to_string(fraction_den));
  }
}

std::int64_t ShiftSpec::group_channels(std::int64_t channels) const {
  validate();
  return channels * fraction_num / (2 * fraction_den);
}

Tensor temporal_shift_fixed(const Tensor& x, const ShiftSpec& spec) {
  if (x.rank() != 5) {
    throw ShapeError("temporal_shift_fixed: expected [B,C,L,H,W], got " + shape_str(x.shape()));
  }
  const std::int64_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
  const std::int64_t plane = x.dim(3) * x.dim(4);
  const std::int64_t group = spec.group_channels(C);
  const bool causal = spec.causal;

  // Source frame for output frame t of channel c, or -1 for zero fill.
  auto source = [group, causal, L](std::int64_t c, std::int64_t t) -> std::int64_t {
    if (c < group) return t - 1;
    if (c < 2 * group && !causal) return t + 1 < L ? t + 1 : -1;
    return t;
  };

  Tensor out = Tensor::zeros(x.shape(), x.dtype());
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto xs = x.data<T>();
    auto os = out.data<T>();
    for (std::int64_t b = 0; b < B; ++b) {
      for (std::int64_t c = 0; c < C; ++c) {
        const std::int64_t base = (b * C + c) * L * plane;
        for (std::int64_t t = 0; t < L; ++t) {
          const std::int64_t s = source(c, t);
          if (s < 0) continue;
          std::copy_n(xs.data() + base + s * plane, plane, os.data() + base + t * plane);
        }
      }
    }
  });
  Tape::record("temporal_shift_fixed", {x}, out,
               [B, C, L, plane, source](const Tensor& g, std::span<Tensor> gi) {
                 dispatch(g.dtype(), [&](auto tag) {
                   using T = decltype(tag);
                   auto gs = g.data<T>();
                   auto dx = gi[0].data<T>();
                   for (std::int64_t b = 0; b < B; ++b) {
                     for (std::int64_t c = 0; c < C; ++c) {
                       const std::int64_t base = (b * C + c) * L * plane;
                       for (std::int64_t t = 0; t < L; ++t) {
                         const std::int64_t s = source(c, t);
                         if (s < 0) continue;
                         T* dst = dx.data() + base + s * plane;
                         const T* src = gs.data() + base + t * plane;
                         for (std::int64_t p = 0; p < plane; ++p) dst[p] += src[p];
                       }
                     }
                   }
                 });
               });
  return out;
}

LearnableShiftKernels LearnableShiftKernels::identity(std::int64_t channels,
                                                      std::int64_t kernel_size,
                                                      const ShiftSpec& spec, DType dtype,
                                                      KernelGrouping grouping) {
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ShapeError("shift kernel size must be odd, got " + std::to_string(kernel_size));
  }
  LearnableShiftKernels k;
  k.channels = channels;
  k.forward_channels = spec.group_channels(channels);
  k.grouping = grouping;
  const std::int64_t rows = grouping == KernelGrouping::per_channel ? channels : 3;
  k.weights = Tensor::zeros({rows, kernel_size}, dtype);
  for (std::int64_t r = 0; r < rows; ++r) k.weights.set(r * kernel_size + kernel_size / 2, 1.0);
  k.weights.set_requires_grad(true);
  return k;
}

void init_tsm_equivalent(LearnableShiftKernels& kernels, const ShiftSpec& spec) {
  const std::int64_t K = kernels.kernel_size();
  const std::int64_t center = K / 2;
  const std::int64_t group = spec.group_channels(kernels.channels);
  if (group > 0 && K < 3) {
    throw ShapeError("TSM-equivalent init needs kernel size >= 3, got " + std::to_string(K));
  }
  kernels.forward_channels = group;
  auto row_tap = [&](std::int64_t kind) {
    // kind: 0 forward, 1 backward, 2 static
    if (kind == 0) return center - 1;
    if (kind == 1) return spec.causal ? center : center + 1;
    return center;
  };
  const std::int64_t rows = kernels.weights.dim(0);
  for (std::int64_t r = 0; r < rows; ++r) {
    std::int64_t kind;
    if (kernels.grouping == KernelGrouping::per_shift_group) {
      kind = r;
    } else {
      kind = r < group ? 0 : (r < 2 * group ? 1 : 2);
    }
    for (std::int64_t j = 0; j < K; ++j) kernels.weights.set(r * K + j, j == row_tap(kind) ? 1.0 : 0.0);
  }
}

Tensor expand_kernels(const LearnableShiftKernels& kernels) {
  if (kernels.grouping == KernelGrouping::per_channel) return kernels.weights;
  const std::int64_t C = kernels.channels, K = kernels.kernel_size();
  const std::int64_t group = kernels.forward_channels;
  auto row_of = [group](std::int64_t c) -> std::int64_t {
    return c < group ? 0 : (c < 2 * group ? 1 : 2);
  };
  const Tensor& w = kernels.weights;
  Tensor out = Tensor::zeros({C, K}, w.dtype());
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t j = 0; j < K; ++j) out.set(c * K + j, w.at(row_of(c) * K + j));
  }
  Tape::record("expand_kernels", {w}, out, [C, K, row_of](const Tensor& g, std::span<Tensor> gi) {
    for (std::int64_t c = 0; c < C; ++c) {
      for (std::int64_t j = 0; j < K; ++j) {
        const std::int64_t dst = row_of(c) * K + j;
        gi[0].set(dst, gi[0].at(dst) + g.at(c * K + j));
      }
    }
  });
  return out;
}

Tensor learnable_temporal_shift(const Tensor& x, const LearnableShiftKernels& kernels,
                                bool causal) {
  if (x.rank() != 5 || x.dim(1) != kernels.channels) {
    throw ShapeError("learnable_temporal_shift: kernels cover " +
                     std::to_string(kernels.channels) + " channels, input is " +
                     shape_str(x.shape()));
  }
  return ops::temporal_conv1d_depthwise(x, expand_kernels(kernels), causal);
}

}  // namespace lgtsm
