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

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "lgtsm/adam.hpp"
#include "lgtsm/ops.hpp"
#include "lgtsm/parallel.hpp"
#include "lgtsm/tape.hpp"
#include "lgtsm/tensor.hpp"
#include "test_support.hpp"

using namespace lgtsm;
using lgtsm::testing::max_abs_diff;
using lgtsm::testing::max_rel_err;
using lgtsm::testing::numeric_grad;
using lgtsm::testing::naive_conv2d;
using lgtsm::testing::naive_temporal_conv;
using lgtsm::testing::random_tensor;

TEST_CASE("conv2d_per_frame: 1x1 identity kernel") {
  const Tensor x = Tensor::full({1, 1, 1, 3, 3}, 1.0);
  const Tensor w = Tensor::from_values({1, 1, 1, 1}, {1.0});
  const Tensor b = Tensor::zeros({1});
  const Tensor y = ops::conv2d_per_frame(x, w, b);
  CHECK(y.shape() == Shape{1, 1, 1, 3, 3});
  for (std::int64_t i = 0; i < 9; ++i) CHECK(y.at(i) == 1.0);
}

TEST_CASE("conv2d_per_frame: 3x3 ones counts overlap") {
  const Tensor x = Tensor::full({1, 1, 1, 3, 3}, 1.0);
  const Tensor w = Tensor::full({1, 1, 3, 3}, 1.0);
  const Tensor y = ops::conv2d_per_frame(x, w, Tensor::zeros({1}), {1, 1, 1});
  CHECK(y.at(4) == 9.0);
  CHECK(y.at(0) == 4.0);
  CHECK(y.at(1) == 6.0);
  CHECK(y.at(8) == 4.0);
}

TEST_CASE("conv2d_per_frame matches direct summation") {
  struct Geometry {
    int stride, dilation;
    std::int64_t k;
  };
  for (const Geometry g : {Geometry{1, 1, 3}, Geometry{2, 1, 5}, Geometry{1, 2, 3},
                           Geometry{2, 2, 3}, Geometry{1, 1, 1}}) {
    CAPTURE(g.stride);
    CAPTURE(g.dilation);
    CAPTURE(g.k);
    const Tensor x = random_tensor({2, 3, 2, 9, 7}, 11);
    const Tensor w = random_tensor({4, 3, g.k, g.k}, 12);
    const Tensor b = random_tensor({4}, 13);
    const int pad = g.dilation * static_cast<int>(g.k - 1) / 2;
    const Tensor y = ops::conv2d_per_frame(x, w, b, {g.stride, g.dilation});
    const Tensor ref = naive_conv2d(x, w, b, g.stride, g.dilation, pad);
    REQUIRE(y.shape() == ref.shape());
    CHECK(y.dim(3) == (9 + g.stride - 1) / g.stride);
    CHECK(max_abs_diff(y, ref) < 1e-12);

    const Tensor y32 =
        ops::conv2d_per_frame(x.to(DType::f32), w.to(DType::f32), b.to(DType::f32),
                              {g.stride, g.dilation});
    CHECK(y32.dtype() == DType::f32);
    CHECK(max_abs_diff(y32, ref) < 1e-4);
  }
}

TEST_CASE("conv2d_per_frame: explicit padding and no bias") {
  const Tensor x = random_tensor({1, 2, 1, 6, 6}, 5);
  const Tensor w = random_tensor({3, 2, 3, 3}, 6);
  const Tensor y = ops::conv2d_per_frame(x, w, Tensor(), {1, 1, 0});
  CHECK(y.shape() == Shape{1, 3, 1, 4, 4});
  CHECK(max_abs_diff(y, naive_conv2d(x, w, Tensor(), 1, 1, 0)) < 1e-12);
}

TEST_CASE("conv2d_per_frame: shape errors") {
  const Tensor x = Tensor::zeros({1, 2, 1, 4, 4});
  CHECK_THROWS_AS(ops::conv2d_per_frame(x, Tensor::zeros({1, 3, 3, 3}), Tensor()), ShapeError);
  CHECK_THROWS_AS(ops::conv2d_per_frame(x, Tensor::zeros({1, 2, 3, 3}), Tensor::zeros({2})),
                  ShapeError);
  CHECK_THROWS_AS(ops::conv2d_per_frame(x, Tensor::zeros({1, 2, 7, 7}), Tensor(), {1, 1, 0}),
                  ShapeError);
  CHECK_THROWS_AS(ops::conv2d_per_frame(Tensor::zeros({2, 4, 4}), Tensor::zeros({1, 2, 3, 3}),
                                        Tensor()),
                  ShapeError);
}

TEST_CASE("conv2d_per_frame gradients agree with central differences") {
  Tensor x = random_tensor({1, 2, 2, 5, 5}, 21).set_requires_grad(true);
  Tensor w = random_tensor({3, 2, 3, 3}, 22).set_requires_grad(true);
  Tensor b = random_tensor({3}, 23).set_requires_grad(true);
  const Tensor r = random_tensor({1, 3, 2, 3, 3}, 24);
  auto f = [&] { return ops::conv2d_per_frame(x, w, b, {2, 1}); };
  {
    Tape tape;
    Tape::Recording rec(tape);
    tape.backward(ops::sum(ops::mul(f(), r)));
  }
  CHECK(max_rel_err(x.grad(), numeric_grad(f, x, r)) < 1e-4);
  CHECK(max_rel_err(w.grad(), numeric_grad(f, w, r)) < 1e-4);
  CHECK(max_rel_err(b.grad(), numeric_grad(f, b, r)) < 1e-4);
}

TEST_CASE("temporal_conv1d_depthwise: centered delta is the identity") {
  const Tensor x = random_tensor({2, 3, 4, 2, 2}, 1);
  const Tensor k = Tensor::from_values({3, 3}, {0, 1, 0, 0, 1, 0, 0, 1, 0});
  CHECK(max_abs_diff(ops::temporal_conv1d_depthwise(x, k), x) == 0.0);
}

TEST_CASE("temporal_conv1d_depthwise: [1,0,0] reads the previous frame") {
  const Tensor x = random_tensor({1, 2, 3, 2, 2}, 2);
  const Tensor k = Tensor::from_values({2, 3}, {1, 0, 0, 1, 0, 0});
  const Tensor y = ops::temporal_conv1d_depthwise(x, k);
  const Shape& s = x.shape();
  for (std::int64_t c = 0; c < 2; ++c)
    for (std::int64_t t = 0; t < 3; ++t)
      for (std::int64_t i = 0; i < 4; ++i) {
        const double expect = t == 0 ? 0.0 : x.at(testing::idx5(s, 0, c, t - 1, 0, 0) + i);
        CHECK(y.at(testing::idx5(s, 0, c, t, 0, 0) + i) == expect);
      }
}

TEST_CASE("temporal_conv1d_depthwise matches direct summation") {
  for (const bool causal : {false, true}) {
    for (const std::int64_t K : {1, 3, 5}) {
      CAPTURE(causal);
      CAPTURE(K);
      const Tensor x = random_tensor({2, 3, 5, 3, 2}, 30 + static_cast<std::uint64_t>(K));
      const Tensor k = random_tensor({3, K}, 40 + static_cast<std::uint64_t>(K));
      CHECK(max_abs_diff(ops::temporal_conv1d_depthwise(x, k, causal),
                         naive_temporal_conv(x, k, causal)) < 1e-13);
    }
  }
}

TEST_CASE("temporal_conv1d_depthwise: kernel size errors") {
  const Tensor x = Tensor::zeros({1, 2, 3, 2, 2});
  CHECK_THROWS_AS(ops::temporal_conv1d_depthwise(x, Tensor::zeros({2, 2})), ShapeError);
  CHECK_THROWS_AS(ops::temporal_conv1d_depthwise(x, Tensor::zeros({2, 7})), ShapeError);
  CHECK_NOTHROW(ops::temporal_conv1d_depthwise(x, Tensor::zeros({2, 5})));
  CHECK_THROWS_AS(ops::temporal_conv1d_depthwise(x, Tensor::zeros({3, 3})), ShapeError);
}

TEST_CASE("temporal_conv1d_depthwise gradients agree with central differences") {
  for (const bool causal : {false, true}) {
    CAPTURE(causal);
    Tensor x = random_tensor({1, 2, 4, 2, 3}, 51).set_requires_grad(true);
    Tensor k = random_tensor({2, 5}, 52).set_requires_grad(true);
    const Tensor r = random_tensor({1, 2, 4, 2, 3}, 53);
    auto f = [&] { return ops::temporal_conv1d_depthwise(x, k, causal); };
    {
      Tape tape;
      Tape::Recording rec(tape);
      tape.backward(ops::sum(ops::mul(f(), r)));
    }
    CHECK(max_rel_err(x.grad(), numeric_grad(f, x, r)) < 1e-4);
    CHECK(max_rel_err(k.grad(), numeric_grad(f, k, r)) < 1e-4);
    if (causal) {
      // Future taps never touch the output.
      CHECK(k.grad().at(3) == 0.0);
      CHECK(k.grad().at(4) == 0.0);
    }
  }
}

TEST_CASE("linearity of the convolutions") {
  const Tensor x = random_tensor({1, 2, 3, 5, 5}, 61);
  const Tensor ax = ops::scale(x, 2.5);
  const Tensor w = random_tensor({2, 2, 3, 3}, 62);
  CHECK(max_abs_diff(ops::conv2d_per_frame(ax, w, Tensor()),
                     ops::scale(ops::conv2d_per_frame(x, w, Tensor()), 2.5)) < 1e-10);
  const Tensor k = random_tensor({2, 3}, 63);
  CHECK(max_abs_diff(ops::temporal_conv1d_depthwise(ax, k),
                     ops::scale(ops::temporal_conv1d_depthwise(x, k), 2.5)) < 1e-10);
}

TEST_CASE("bilinear_resize: constants, identity and the sampling formula") {
  const Tensor c = Tensor::full({1, 2, 2, 3, 5}, 0.75);
  const Tensor up = ops::bilinear_resize(c, 7, 4);
  CHECK(up.shape() == Shape{1, 2, 2, 7, 4});
  for (std::int64_t i = 0; i < up.numel(); ++i) CHECK(up.at(i) == doctest::Approx(0.75));

  const Tensor x = random_tensor({1, 1, 2, 5, 6}, 70);
  CHECK(max_abs_diff(ops::bilinear_resize(x, 5, 6), x) < 1e-12);

  // Half-pixel centers: output column o samples source (o + 0.5) * 2/4 - 0.5,
  // clamped to the valid range, i.e. -0.25 -> 0, 0.25, 0.75, 1.25 -> 1.
  const Tensor f = Tensor::from_values({1, 1, 1, 2, 2}, {0, 2, 0, 2});
  const Tensor g = ops::bilinear_resize(f, 4, 4);
  const double expect[4] = {0.0, 0.5, 1.5, 2.0};
  for (std::int64_t y = 0; y < 4; ++y) {
    for (std::int64_t xx = 0; xx < 4; ++xx) {
      CHECK(g.at(y * 4 + xx) == doctest::Approx(expect[xx]).epsilon(1e-12));
      if (xx > 0) CHECK(g.at(y * 4 + xx) >= g.at(y * 4 + xx - 1));
    }
  }
  CHECK_THROWS_AS(ops::bilinear_resize(x, 0, 3), ShapeError);
}

TEST_CASE("elementwise values") {
  CHECK(ops::sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  CHECK(ops::relu(Tensor::scalar(-1.0)).item() == 0.0);
  CHECK(ops::relu(Tensor::scalar(2.0)).item() == 2.0);
  CHECK(ops::leaky_relu(Tensor::scalar(-2.0), 0.2).item() == doctest::Approx(-0.4));
  CHECK(ops::tanh(Tensor::scalar(0.3)).item() == doctest::Approx(std::tanh(0.3)));
  CHECK(ops::abs(Tensor::scalar(-3.0)).item() == 3.0);
  for (const DType dt : {DType::f32, DType::f64}) {
    for (const double v : {-1000.0, -40.0, 40.0, 1000.0}) {
      const double s = ops::sigmoid(Tensor::scalar(v, dt)).item();
      CHECK(s > 0.0);
      CHECK(s < 1.0);
    }
  }
  const Tensor a = Tensor::from_values({3}, {1, 2, 3});
  const Tensor b = Tensor::from_values({3}, {4, 5, 6});
  CHECK(ops::sum(ops::mul(a, b)).item() == 32.0);
  CHECK(ops::mean(ops::sub(b, a)).item() == 3.0);
  CHECK(ops::sum(ops::add(a, b)).item() == 21.0);
  CHECK_THROWS_AS(ops::add(a, Tensor::zeros({2})), ShapeError);
}

TEST_CASE("gram_matrix: small cases") {
  const Tensor ones = Tensor::full({1, 1, 1, 2, 2}, 1.0);
  const Tensor g = ops::gram_matrix(ones);
  CHECK(g.shape() == Shape{1, 1, 1, 1});
  CHECK(g.item() == 1.0);

  Tensor onehot = Tensor::zeros({1, 2, 1, 2, 2});
  onehot.set(0, 1.0);      // channel 0, pixel (0,0)
  onehot.set(4 + 3, 1.0);  // channel 1, pixel (1,1)
  const Tensor h = ops::gram_matrix(onehot);
  CHECK(h.at(1) == 0.0);
  CHECK(h.at(2) == 0.0);
  CHECK(h.at(0) == doctest::Approx(1.0 / 8.0));
}

TEST_CASE("gram_matrix: symmetric, PSD and equal to the direct sum") {
  const std::int64_t C = 4, H = 3, W = 2;
  const Tensor f = random_tensor({2, C, 3, H, W}, 80);
  const Tensor g = ops::gram_matrix(f);
  REQUIRE(g.shape() == Shape{2, 3, C, C});
  for (std::int64_t b = 0; b < 2; ++b) {
    for (std::int64_t t = 0; t < 3; ++t) {
      Eigen::MatrixXd m(C, C);
      for (std::int64_t i = 0; i < C; ++i) {
        for (std::int64_t j = 0; j < C; ++j) {
          double acc = 0.0;
          for (std::int64_t p = 0; p < H * W; ++p) {
            acc += f.at(testing::idx5(f.shape(), b, i, t, 0, 0) + p) *
                   f.at(testing::idx5(f.shape(), b, j, t, 0, 0) + p);
          }
          const double v = g.at(((b * 3 + t) * C + i) * C + j);
          CHECK(v == doctest::Approx(acc / static_cast<double>(C * H * W)).epsilon(1e-12));
          m(i, j) = v;
        }
      }
      CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
      CHECK(es.eigenvalues().minCoeff() >= -1e-9);
    }
  }
}

TEST_CASE("backward: sums, products and accumulation") {
  Tensor x = random_tensor({2, 3}, 90).set_requires_grad(true);
  Tensor y = random_tensor({2, 3}, 91);
  Tape tape;
  {
    Tape::Recording rec(tape);
    tape.backward(ops::sum(x));
  }
  for (std::int64_t i = 0; i < 6; ++i) CHECK(x.grad().at(i) == 1.0);

  x.zero_grad();
  CHECK_FALSE(x.grad().defined());
  Tape tape2;
  {
    Tape::Recording rec(tape2);
    const Tensor loss = ops::sum(ops::mul(x, y));
    tape2.backward(loss);
    tape2.backward(loss);
  }
  for (std::int64_t i = 0; i < 6; ++i) CHECK(x.grad().at(i) == 2.0 * y.at(i));
  CHECK_FALSE(y.grad().defined());
}

TEST_CASE("backward: a shared input collects both paths") {
  Tensor x = Tensor::from_values({2}, {1.5, -2.0}).set_requires_grad(true);
  Tape tape;
  Tape::Recording rec(tape);
  // d/dx (x*x + 3x) = 2x + 3
  tape.backward(ops::sum(ops::add(ops::mul(x, x), ops::scale(x, 3.0))));
  CHECK(x.grad().at(0) == doctest::Approx(6.0));
  CHECK(x.grad().at(1) == doctest::Approx(-1.0));
}

TEST_CASE("backward: non-scalar loss is rejected") {
  Tensor x = random_tensor({3}, 92).set_requires_grad(true);
  Tape tape;
  Tape::Recording rec(tape);
  const Tensor y = ops::scale(x, 2.0);
  CHECK_THROWS_AS(tape.backward(y), ShapeError);
}

TEST_CASE("tape records only tracked computations") {
  Tensor x = random_tensor({3}, 93).set_requires_grad(true);
  Tape tape;
  Tape::Recording rec(tape);
  (void)ops::scale(random_tensor({3}, 94), 2.0);
  CHECK(tape.size() == 0);
  {
    Tape::Paused paused;
    (void)ops::scale(x, 2.0);
  }
  CHECK(tape.size() == 0);
  const Tensor y = ops::scale(x, 2.0);
  CHECK(tape.size() == 1);
  CHECK(tape.tracks(y));
  CHECK(tape.nodes()[0].op == "scale");
}

TEST_CASE("verification mode names the op that produced a non-finite value") {
  const Tensor big = Tensor::full({2}, 1e300);
  CHECK_NOTHROW(ops::mul(big, big));
  VerificationScope scope;
  try {
    (void)ops::mul(big, big);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("mul") != std::string::npos);
  }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Tensor p = Tensor::from_values({3}, {1.0, -2.0, 0.5});
  const Tensor before = p.clone();
  Adam adam({{"p", p}}, AdamOptions{0.1});
  p.set_requires_grad(true);
  Tape tape;
  {
    Tape::Recording rec(tape);
    tape.backward(ops::scale(ops::sum(p), 0.0));
  }
  REQUIRE(p.grad().defined());
  adam.step();
  CHECK(testing::bit_equal(p, before));
  CHECK(adam.steps() == 1);
}

TEST_CASE("adam: first bias-corrected step moves by lr against the gradient sign") {
  for (const double g : {3.0, -0.01}) {
    Tensor p = Tensor::from_values({1}, {0.25}).set_requires_grad(true);
    Adam adam({{"p", p}}, AdamOptions{0.1, 0.5, 0.9, 1e-8});
    Tape tape;
    {
      Tape::Recording rec(tape);
      tape.backward(ops::scale(ops::sum(p), g));
    }
    adam.step();
    CHECK(p.at(0) - 0.25 == doctest::Approx(-0.1 * (g > 0 ? 1.0 : -1.0)).epsilon(1e-5));
  }
}

TEST_CASE("adam: parameters without gradients are skipped") {
  Tensor p = Tensor::from_values({1}, {1.0}).set_requires_grad(true);
  Tensor q = Tensor::from_values({1}, {2.0}).set_requires_grad(true);
  Adam adam({{"p", p}, {"q", q}}, AdamOptions{0.1});
  Tape tape;
  {
    Tape::Recording rec(tape);
    tape.backward(ops::sum(p));
  }
  adam.step();
  CHECK(p.at(0) != 1.0);
  CHECK(q.at(0) == 2.0);
  CHECK_THROWS_AS(Adam({{"a", p}, {"a", q}}, AdamOptions{}), ShapeError);
}

TEST_CASE("adam: converges on a one-dimensional quadratic") {
  // f(p) = (p - 3)^2, gradient 2(p - 3), computed by hand each step.
  Tensor p = Tensor::from_values({1}, {-2.0}).set_requires_grad(true);
  Adam adam({{"p", p}}, AdamOptions{0.05, 0.9, 0.999, 1e-8});
  int steps = 0;
  for (; steps < 500 && std::abs(p.at(0) - 3.0) >= 1e-3; ++steps) {
    adam.zero_grad();
    Tape tape;
    Tape::Recording rec(tape);
    const Tensor d = ops::add_scalar(p, -3.0);
    tape.backward(ops::sum(ops::mul(d, d)));
    adam.step();
  }
  CHECK(std::abs(p.at(0) - 3.0) < 1e-3);
  CHECK(steps <= 500);
}

TEST_CASE("single-threaded kernels are bit-reproducible") {
  set_num_threads(1);
  const Tensor x = random_tensor({2, 3, 4, 8, 8}, 100, DType::f32);
  const Tensor w = random_tensor({5, 3, 5, 5}, 101, DType::f32);
  const Tensor b = random_tensor({5}, 102, DType::f32);
  CHECK(testing::bit_equal(ops::conv2d_per_frame(x, w, b, {2, 1}),
                           ops::conv2d_per_frame(x, w, b, {2, 1})));
}

TEST_CASE("dtype conversion and clone semantics") {
  Tensor a = random_tensor({4}, 110);
  Tensor alias = a;
  Tensor copy = a.clone();
  a.set(0, 42.0);
  CHECK(alias.at(0) == 42.0);
  CHECK(copy.at(0) != 42.0);
  const Tensor f = a.to(DType::f32);
  CHECK(f.dtype() == DType::f32);
  CHECK(f.at(1) == static_cast<double>(static_cast<float>(a.at(1))));
  CHECK_THROWS(a.data<float>());
}
