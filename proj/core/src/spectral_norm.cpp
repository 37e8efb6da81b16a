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

#include "lgtsm/spectral_norm.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "lgtsm/tape.hpp"

namespace lgtsm {

namespace {

using MatrixXdRow = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

MatrixXdRow as_matrix(const Tensor& w) {
  const std::int64_t rows = w.dim(0);
  const std::int64_t cols = w.numel() / rows;
  MatrixXdRow m(rows, cols);
  dispatch(w.dtype(), [&](auto tag) {
    const auto src = w.data<decltype(tag)>();
    std::copy(src.begin(), src.end(), m.data());
  });
  return m;
}

void normalize(Eigen::VectorXd& v) {
  const double n = v.norm();
  v /= std::max(n, 1e-12);
}

}  // namespace

SpectralNormState SpectralNormState::create(std::int64_t rows, DType dtype, std::mt19937_64& rng,
                                            int power_iterations) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd u(rows);
  for (std::int64_t i = 0; i < rows; ++i) u[i] = normal(rng);
  normalize(u);
  SpectralNormState s;
  s.u = Tensor::from_values({rows}, std::span<const double>(u.data(), u.size()), dtype);
  s.power_iterations = power_iterations;
  return s;
}

void SpectralNormState::warm_start(const Tensor& w) {
  if (!u.defined() || u.numel() != w.dim(0)) {
    throw ShapeError("SpectralNormState::warm_start: u has wrong length for weight " +
                     shape_str(w.shape()));
  }
  const MatrixXdRow m = as_matrix(w);
  // Top eigenvector of the small [Cout, Cout] Gram matrix; this is what the
  // power iteration converges to, without its slow rate when the leading
  // singular values are close.
  const Eigen::MatrixXd gram = m * m.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) return;
  const Eigen::Index top = gram.rows() - 1;
  if (!(eig.eigenvalues()[top] > 0.0)) return;
  Eigen::VectorXd uu = eig.eigenvectors().col(top);
  double dot = 0.0;
  for (std::int64_t i = 0; i < m.rows(); ++i) dot += uu[i] * u.at(i);
  if (dot < 0.0) uu = -uu;
  for (std::int64_t i = 0; i < m.rows(); ++i) u.set(i, uu[i]);
}

Tensor spectral_normalize(const Tensor& w, SpectralNormState& state, bool update) {
  if (w.rank() < 2) throw ShapeError("spectral_normalize: weight rank must be >= 2");
  if (!state.u.defined() || state.u.numel() != w.dim(0)) {
    throw ShapeError("spectral_normalize: state u has wrong length for weight " +
                     shape_str(w.shape()));
  }
  const MatrixXdRow m = as_matrix(w);
  Eigen::VectorXd u(m.rows());
  for (std::int64_t i = 0; i < m.rows(); ++i) u[i] = state.u.at(i);
  Eigen::VectorXd v = m.transpose() * u;
  normalize(v);
  if (update) {
    for (int it = 0; it < state.power_iterations; ++it) {
      if (it > 0) {
        v = m.transpose() * u;
        normalize(v);
      }
      u = m * v;
      normalize(u);
    }
    v = m.transpose() * u;
    normalize(v);
    for (std::int64_t i = 0; i < m.rows(); ++i) state.u.set(i, u[i]);
  }
  const double sigma = std::max(u.dot(m * v), 1e-12);

  Tensor out = Tensor::zeros(w.shape(), w.dtype());
  dispatch(w.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto ws = w.data<T>();
    auto os = out.data<T>();
    for (std::size_t i = 0; i < ws.size(); ++i) os[i] = static_cast<T>(ws[i] / sigma);
  });
  check_finite(out, "spectral_normalize");
  // d(W/sigma) with sigma = u^T W v and u, v held fixed:
  // dW = G/sigma - <G, W>/sigma^2 * u v^T. Without a power-iteration update
  // sigma equals |W^T u|, for which this is the exact derivative.
  std::vector<double> uv(static_cast<std::size_t>(m.rows() * m.cols()));
  for (std::int64_t r = 0; r < m.rows(); ++r) {
    for (std::int64_t c = 0; c < m.cols(); ++c) {
      uv[static_cast<std::size_t>(r * m.cols() + c)] = u[r] * v[c];
    }
  }
  Tape::record("spectral_normalize", {w}, out,
               [sigma, w, uv = std::move(uv)](const Tensor& g, std::span<Tensor> gi) {
                 dispatch(g.dtype(), [&](auto tag) {
                   using T = decltype(tag);
                   auto gs = g.data<T>();
                   auto ws = w.data<T>();
                   auto dw = gi[0].data<T>();
                   double gw = 0.0;
                   for (std::size_t i = 0; i < gs.size(); ++i) {
                     gw += static_cast<double>(gs[i]) * static_cast<double>(ws[i]);
                   }
                   const double k = gw / (sigma * sigma);
                   for (std::size_t i = 0; i < gs.size(); ++i) {
                     dw[i] += static_cast<T>(static_cast<double>(gs[i]) / sigma - k * uv[i]);
                   }
                 });
               });
  return out;
}

double top_singular_value(const Tensor& w) {
  const MatrixXdRow m = as_matrix(w);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
}

}  // namespace lgtsm
