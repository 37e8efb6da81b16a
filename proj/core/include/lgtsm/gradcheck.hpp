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
#include <string>
#include <vector>

#include "lgtsm/tensor.hpp"

namespace lgtsm {

enum class GradComponent : std::uint8_t { all, ops, layer, generator, losses };

const char* grad_component_name(GradComponent c);
GradComponent parse_grad_component(const std::string& name);

// A differentiable function of some f64 inputs. Inputs with requires_grad
// set are checked; the others are held fixed.
struct GradCase {
  std::string name;
  GradComponent component = GradComponent::ops;
  std::function<Tensor(const std::vector<Tensor>&)> fn;
  std::vector<Tensor> inputs;
};

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0;
  std::int64_t coordinates = 0;
  std::string worst;  // "input k[i]" of the largest error
  bool passed = false;
};

struct GradCheckReport {
  double tolerance = 1e-4;
  std::vector<GradCheckResult> results;

  bool passed() const;
  std::vector<std::string> failures() const;
  // One line per case with its max relative error and PASS/FAIL.
  std::string format() const;
};

// Compares the tape gradient of sum(f(x) * R), R a fixed random projection,
// with central differences (h = 1e-6 * max(1, |x_i|)) over every coordinate
// of every checked input. Relative error is |a - n| / max(|a|, |n|, 1e-3).
GradCheckResult check_gradients(const GradCase& c, double tolerance = 1e-4,
                                std::uint64_t seed = 0);

// The built-in suite: every differentiable op, LGTSM layers, a mini
// generator, the discriminator and both loss stacks, on tiny f64 shapes.
std::vector<GradCase> gradcheck_cases(GradComponent component = GradComponent::all,
                                      std::uint64_t seed = 0);

GradCheckReport run_gradcheck(const std::vector<GradCase>& cases, double tolerance = 1e-4,
                              std::uint64_t seed = 0);

}  // namespace lgtsm
