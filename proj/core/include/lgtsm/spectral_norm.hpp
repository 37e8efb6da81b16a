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
#include <random>

#include "lgtsm/tensor.hpp"

namespace lgtsm {

// Persistent left singular vector estimate for one weight tensor.
struct SpectralNormState {
  Tensor u;  // [Cout], unit norm
  int power_iterations = 1;

  static SpectralNormState create(std::int64_t rows, DType dtype, std::mt19937_64& rng,
                                  int power_iterations = 1);

  // Sets u to the top left singular vector of w, the fixed point of the
  // power iteration. Layers call this once at construction.
  void warm_start(const Tensor& w);
};

// Returns w / sigma where sigma = u^T W v is the power-iteration estimate of
// the top singular value of w viewed as [Cout, rest]. With update=true the
// state runs its power iterations first and keeps the refined u; with
// update=false u is read only, so repeated calls are bit-identical.
Tensor spectral_normalize(const Tensor& w, SpectralNormState& state, bool update = true);

// Largest singular value of w viewed as [Cout, rest], by dense SVD.
double top_singular_value(const Tensor& w);

}  // namespace lgtsm
