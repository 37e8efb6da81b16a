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

#include "lgtsm/adam.hpp"

#include <cmath>
#include <set>

namespace lgtsm {

void check_unique_names(std::span<const Parameter> params) {
  std::set<std::string> seen;
  for (const auto& p : params) {
    if (!seen.insert(p.name).second) throw ShapeError("duplicate parameter name " + p.name);
  }
}

std::int64_t count_scalars(std::span<const Parameter> params) {
  std::int64_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

Adam::Adam(std::vector<Parameter> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  check_unique_names(params_);
  for (const auto& p : params_) {
    m_.push_back(Tensor::zeros(p.tensor.shape(), p.tensor.dtype()));
    v_.push_back(Tensor::zeros(p.tensor.shape(), p.tensor.dtype()));
  }
}

void Adam::step() {
  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor g = params_[i].tensor.grad();
    if (!g.defined()) continue;
    Tensor& param = params_[i].tensor;
    dispatch(param.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto w = param.data<T>();
      auto gs = g.data<T>();
      auto m = m_[i].data<T>();
      auto v = v_[i].data<T>();
      const T tb1 = static_cast<T>(b1), tb2 = static_cast<T>(b2);
      const T lr = static_cast<T>(options_.lr), eps = static_cast<T>(options_.epsilon);
      const T tc1 = static_cast<T>(c1), tc2 = static_cast<T>(c2);
      for (std::size_t k = 0; k < w.size(); ++k) {
        m[k] = tb1 * m[k] + (T(1) - tb1) * gs[k];
        v[k] = tb2 * v[k] + (T(1) - tb2) * gs[k] * gs[k];
        const T mhat = m[k] / tc1;
        const T vhat = v[k] / tc2;
        w[k] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    });
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace lgtsm
