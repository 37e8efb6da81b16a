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

// Shared fixtures and brute-force oracles for the unit and acceptance tests.
// The oracles are written as plain loops over flat indices and never call
// into the library kernels they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lgtsm/tape.hpp"
#include "lgtsm/tensor.hpp"

namespace lgtsm::testing {

inline Tensor random_tensor(const Shape& shape, std::uint64_t seed, DType dtype = DType::f64,
                            double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t = Tensor::zeros(shape, dtype);
  for (std::int64_t i = 0; i < t.numel(); ++i) t.set(i, u(rng));
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double m = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.at(i) - b.at(i)));
  return m;
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.dtype() != b.dtype()) return false;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    if (a.at(i) != b.at(i)) return false;
  }
  return true;
}

// Row-major flat offset into a 5-D [B,C,L,H,W] tensor.
inline std::int64_t idx5(const Shape& s, std::int64_t b, std::int64_t c, std::int64_t t,
                         std::int64_t y, std::int64_t x) {
  return (((b * s[1] + c) * s[2] + t) * s[3] + y) * s[4] + x;
}

// Direct-summation 2-D convolution of every frame.
inline Tensor naive_conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
                           int dilation, int padding) {
  const Shape& xs = x.shape();
  const std::int64_t cout = w.dim(0), cin = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const std::int64_t ho = (xs[3] + 2 * padding - dilation * (kh - 1) - 1) / stride + 1;
  const std::int64_t wo = (xs[4] + 2 * padding - dilation * (kw - 1) - 1) / stride + 1;
  Tensor out = Tensor::zeros({xs[0], cout, xs[2], ho, wo}, DType::f64);
  const Shape& os = out.shape();
  for (std::int64_t b = 0; b < xs[0]; ++b)
    for (std::int64_t co = 0; co < cout; ++co)
      for (std::int64_t t = 0; t < xs[2]; ++t)
        for (std::int64_t oy = 0; oy < ho; ++oy)
          for (std::int64_t ox = 0; ox < wo; ++ox) {
            double acc = bias.defined() ? bias.at(co) : 0.0;
            for (std::int64_t ci = 0; ci < cin; ++ci)
              for (std::int64_t i = 0; i < kh; ++i)
                for (std::int64_t j = 0; j < kw; ++j) {
                  const std::int64_t y = oy * stride - padding + i * dilation;
                  const std::int64_t xx = ox * stride - padding + j * dilation;
                  if (y < 0 || y >= xs[3] || xx < 0 || xx >= xs[4]) continue;
                  acc += w.at(((co * cin + ci) * kh + i) * kw + j) * x.at(idx5(xs, b, ci, t, y, xx));
                }
            out.set(idx5(os, b, co, t, oy, ox), acc);
          }
  return out;
}

// Direct-summation depthwise temporal convolution with zero padding.
inline Tensor naive_temporal_conv(const Tensor& x, const Tensor& k, bool causal) {
  const Shape& s = x.shape();
  const std::int64_t K = k.dim(1), half = (K - 1) / 2;
  Tensor out = Tensor::zeros(s, DType::f64);
  for (std::int64_t b = 0; b < s[0]; ++b)
    for (std::int64_t c = 0; c < s[1]; ++c)
      for (std::int64_t t = 0; t < s[2]; ++t)
        for (std::int64_t y = 0; y < s[3]; ++y)
          for (std::int64_t xx = 0; xx < s[4]; ++xx) {
            double acc = 0.0;
            for (std::int64_t j = 0; j < K; ++j) {
              if (causal && j > half) continue;
              const std::int64_t src = t + j - half;
              if (src < 0 || src >= s[2]) continue;
              acc += k.at(c * K + j) * x.at(idx5(s, b, c, src, y, xx));
            }
            out.set(idx5(s, b, c, t, y, xx), acc);
          }
  return out;
}

// Central differences of sum(f(x) * r) with respect to x, computed without
// the tape.
inline std::vector<double> numeric_grad(const std::function<Tensor()>& f, Tensor& x, const Tensor& r) {
  std::vector<double> g(static_cast<std::size_t>(x.numel()));
  auto objective = [&] {
    Tape::Paused paused;
    const Tensor y = f();
    double s = 0.0;
    for (std::int64_t i = 0; i < y.numel(); ++i) s += y.at(i) * r.at(i);
    return s;
  };
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    const double x0 = x.at(i);
    const double h = 1e-6 * std::max(1.0, std::abs(x0));
    x.set(i, x0 + h);
    const double fp = objective();
    x.set(i, x0 - h);
    const double fm = objective();
    x.set(i, x0);
    g[static_cast<std::size_t>(i)] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double max_rel_err(const Tensor& analytic, const std::vector<double>& numeric) {
  double worst = 0.0;
  for (std::int64_t i = 0; i < analytic.numel(); ++i) {
    const double a = analytic.at(i), n = numeric[static_cast<std::size_t>(i)];
    worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-3}));
  }
  return worst;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("lgtsm_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace lgtsm::testing
