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
#include <span>
#include <string>
#include <vector>

#include "lgtsm/tensor.hpp"

namespace lgtsm {

// A trainable tensor with a hierarchical name such as "generator.layer3.Wf".
struct Parameter {
  std::string name;
  Tensor tensor;
};

// Throws ShapeError on duplicate names.
void check_unique_names(std::span<const Parameter> params);

std::int64_t count_scalars(std::span<const Parameter> params);

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon = 1e-8;
};

// Adam with bias correction. Moments live in the parameter dtype.
class Adam {
 public:
  Adam(std::vector<Parameter> params, AdamOptions options);

  // Parameters whose gradient was never populated are skipped.
  void step();
  void zero_grad();

  std::int64_t steps() const { return step_; }
  void set_steps(std::int64_t step) { step_ = step; }
  const AdamOptions& options() const { return options_; }
  void set_lr(double lr) { options_.lr = lr; }

  const std::vector<Parameter>& params() const { return params_; }
  // First/second moments, index-aligned with params().
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  std::vector<Parameter> params_;
  std::vector<Tensor> m_, v_;
  AdamOptions options_;
  std::int64_t step_ = 0;
};

}  // namespace lgtsm
