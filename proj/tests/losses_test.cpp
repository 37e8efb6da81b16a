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

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "doctest.h"
#include "lgtsm/losses.hpp"
#include "lgtsm/ops.hpp"
#include "lgtsm/tape.hpp"
#include "test_support.hpp"

using namespace lgtsm;
using lgtsm::testing::idx5;
using lgtsm::testing::max_rel_err;
using lgtsm::testing::naive_conv2d;
using lgtsm::testing::numeric_grad;
using lgtsm::testing::random_tensor;

namespace {

// Stage-by-stage features of a video using direct summation convolutions.
std::vector<Tensor> oracle_features(const FeatureExtractor& fx, const Tensor& video) {
  std::vector<Tensor> out;
  Tensor x = video.to(DType::f64);
  for (const auto& st : fx.stages()) {
    const int pad = static_cast<int>(st.weight.dim(2) - 1) / 2;
    Tensor y = naive_conv2d(x, st.weight.to(DType::f64), Tensor(), st.stride, 1, pad);
    for (std::int64_t i = 0; i < y.numel(); ++i) {
      if (y.at(i) < 0) y.set(i, y.at(i) * st.slope);
    }
    out.push_back(y);
    x = y;
  }
  return out;
}

double oracle_perceptual(const FeatureExtractor& fx, const Tensor& o, const Tensor& v) {
  const auto fo = oracle_features(fx, o), fv = oracle_features(fx, v);
  const std::int64_t B = o.dim(0);
  double total = 0.0;
  for (std::size_t p = 0; p < fo.size(); ++p) {
    const Shape& s = fo[p].shape();
    const double n = double(s[1] * s[3] * s[4]);
    for (std::int64_t i = 0; i < fo[p].numel(); ++i) total += std::abs(fo[p].at(i) - fv[p].at(i)) / n;
  }
  return total / double(B);
}

// Brute-force Gram matrices of frame t of batch item b.
std::vector<double> oracle_gram(const Tensor& f, std::int64_t b, std::int64_t t) {
  const Shape& s = f.shape();
  const std::int64_t C = s[1], P = s[3] * s[4];
  std::vector<double> g(static_cast<std::size_t>(C * C));
  for (std::int64_t i = 0; i < C; ++i)
    for (std::int64_t j = 0; j < C; ++j) {
      double acc = 0.0;
      for (std::int64_t p = 0; p < P; ++p) {
        acc += f.at(idx5(s, b, i, t, 0, 0) + p) * f.at(idx5(s, b, j, t, 0, 0) + p);
      }
      g[static_cast<std::size_t>(i * C + j)] = acc / double(C * P);
    }
  return g;
}

double oracle_style(const FeatureExtractor& fx, const Tensor& o, const Tensor& v) {
  const auto fo = oracle_features(fx, o), fv = oracle_features(fx, v);
  const std::int64_t B = o.dim(0), L = o.dim(2);
  double total = 0.0;
  for (std::size_t p = 0; p < fo.size(); ++p) {
    const double C = double(fo[p].dim(1));
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t t = 0; t < L; ++t) {
        const auto go = oracle_gram(fo[p], b, t), gv = oracle_gram(fv[p], b, t);
        for (std::size_t k = 0; k < go.size(); ++k) total += std::abs(go[k] - gv[k]) / (C * C);
      }
  }
  return total / double(B);
}

FeatureExtractor small_extractor(std::uint64_t seed) {
  return FeatureExtractor::seeded_random(seed, DType::f64, {4, 6, 8});
}

}  // namespace

TEST_CASE("l1_loss") {
  const Tensor v = random_tensor({2, 3, 2, 4, 4}, 1);
  CHECK(l1_loss(v, v).item() == 0.0);
  CHECK(l1_loss(Tensor::zeros({1, 3, 1, 2, 2}), Tensor::full({1, 3, 1, 2, 2}, 1.0)).item() == 1.0);
  const Tensor o = random_tensor({2, 3, 2, 4, 4}, 2);
  double acc = 0.0;
  for (std::int64_t i = 0; i < o.numel(); ++i) acc += std::abs(o.at(i) - v.at(i));
  CHECK(l1_loss(o, v).item() == doctest::Approx(acc / double(o.numel())).epsilon(1e-14));
  CHECK_THROWS_AS(l1_loss(o, Tensor::zeros({2, 3, 2, 4, 2})), ShapeError);
}

TEST_CASE("masked_l1_loss weights masked pixels") {
  const Tensor o = random_tensor({1, 3, 2, 4, 4}, 3);
  const Tensor v = random_tensor({1, 3, 2, 4, 4}, 4);
  Tensor m = Tensor::zeros({1, 1, 2, 4, 4});
  for (std::int64_t i = 0; i < m.numel(); i += 3) m.set(i, 1.0);
  double num = 0.0, den = 0.0;
  for (std::int64_t c = 0; c < 3; ++c)
    for (std::int64_t p = 0; p < 32; ++p) {
      const double w = m.at(p) > 0 ? 6.0 : 1.0;
      num += w * std::abs(o.at(c * 32 + p) - v.at(c * 32 + p));
      den += w;
    }
  CHECK(masked_l1_loss(o, v, m, 6.0).item() == doctest::Approx(num / den).epsilon(1e-13));
  CHECK(masked_l1_loss(o, v, m, 1.0).item() == doctest::Approx(l1_loss(o, v).item()).epsilon(1e-13));
}

TEST_CASE("feature extractor structure and determinism") {
  const FeatureExtractor fx = FeatureExtractor::seeded_random(5, DType::f32);
  REQUIRE(fx.stages().size() == 3);
  const auto f = fx.features(random_tensor({1, 3, 2, 32, 32}, 6, DType::f32));
  REQUIRE(f.size() == 3);
  CHECK(f[0].shape() == Shape{1, 16, 2, 16, 16});
  CHECK(f[1].shape() == Shape{1, 32, 2, 8, 8});
  CHECK(f[2].shape() == Shape{1, 64, 2, 4, 4});
  const FeatureExtractor fx2 = FeatureExtractor::seeded_random(5, DType::f32);
  for (std::size_t s = 0; s < 3; ++s) {
    CHECK(testing::bit_equal(fx.stages()[s].weight, fx2.stages()[s].weight));
    CHECK_FALSE(fx.stages()[s].weight.requires_grad());
  }
}

TEST_CASE("feature extractor file round trip and layout") {
  testing::TempDir dir("fx");
  const FeatureExtractor fx = small_extractor(7);
  const auto path = dir.path() / "fx.bin";
  fx.save(path);
  std::ifstream in(path, std::ios::binary);
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  REQUIRE(bytes.size() > 8 + 16);
  CHECK(std::memcmp(bytes.data(), "LGTSMFX1", 8) == 0);
  // First stage dims 4,3,3,3 as little-endian u32.
  const unsigned char dims[16] = {4, 0, 0, 0, 3, 0, 0, 0, 3, 0, 0, 0, 3, 0, 0, 0};
  CHECK(std::memcmp(bytes.data() + 8, dims, 16) == 0);
  std::size_t expect = 8;
  for (const auto& st : fx.stages()) expect += 16 + 4 * static_cast<std::size_t>(st.weight.numel());
  CHECK(bytes.size() == expect);

  const FeatureExtractor back = FeatureExtractor::load(path, DType::f64);
  REQUIRE(back.stages().size() == fx.stages().size());
  for (std::size_t s = 0; s < fx.stages().size(); ++s) {
    const Tensor& a = fx.stages()[s].weight;
    const Tensor& b = back.stages()[s].weight;
    REQUIRE(a.shape() == b.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(b.at(i) == double(float(a.at(i))));
  }

  std::ofstream bad(dir.path() / "bad.bin", std::ios::binary);
  bad << "NOTMAGIC";
  bad.close();
  CHECK_THROWS_AS(FeatureExtractor::load(dir.path() / "bad.bin", DType::f32), DataError);
  CHECK_THROWS_AS(FeatureExtractor::load(dir.path() / "missing.bin", DType::f32), DataError);
}

TEST_CASE("perceptual_loss against a stage-by-stage re-implementation") {
  const FeatureExtractor fx = small_extractor(8);
  const Tensor v = random_tensor({2, 3, 2, 16, 16}, 9);
  const Tensor o = random_tensor({2, 3, 2, 16, 16}, 10);
  CHECK(perceptual_loss(v, v, fx).item() == 0.0);
  CHECK(perceptual_loss(o, v, fx).item() ==
        doctest::Approx(oracle_perceptual(fx, o, v)).epsilon(1e-12));
}

TEST_CASE("perceptual_loss of a single linear stage is linear in the weights") {
  const Tensor w = random_tensor({5, 3, 3, 3}, 11);
  FeatureExtractor a({{w, 2, 1.0}});
  FeatureExtractor b({{ops::scale(w, 2.0), 2, 1.0}});
  const Tensor v = random_tensor({1, 3, 2, 8, 8}, 12);
  const Tensor o = random_tensor({1, 3, 2, 8, 8}, 13);
  CHECK(perceptual_loss(o, v, b).item() ==
        doctest::Approx(2.0 * perceptual_loss(o, v, a).item()).epsilon(1e-13));
}

TEST_CASE("style_loss against brute-force Gram differences") {
  const FeatureExtractor fx = small_extractor(14);
  const Tensor v = random_tensor({2, 3, 3, 16, 16}, 15);
  const Tensor o = random_tensor({2, 3, 3, 16, 16}, 16);
  CHECK(style_loss(v, v, fx).item() == 0.0);
  const double ref = oracle_style(fx, o, v);
  CHECK(std::abs(style_loss(o, v, fx).item() - ref) / ref < 1e-10);
}

TEST_CASE("style_loss ignores spatial permutations under a 1x1 stage") {
  FeatureExtractor fx({{random_tensor({4, 3, 1, 1}, 17), 1, 0.2}});
  const Tensor v = random_tensor({1, 3, 2, 6, 6}, 18);
  Tensor o = Tensor::zeros(v.shape());
  // Reverse the pixel order within each frame.
  for (std::int64_t c = 0; c < 3; ++c)
    for (std::int64_t t = 0; t < 2; ++t)
      for (std::int64_t p = 0; p < 36; ++p)
        o.set(idx5(v.shape(), 0, c, t, 0, 0) + p, v.at(idx5(v.shape(), 0, c, t, 0, 0) + 35 - p));
  CHECK(style_loss(o, v, fx).item() < 1e-14);
  CHECK(perceptual_loss(o, v, fx).item() > 0.0);
}

TEST_CASE("hinge and adversarial losses") {
  const Shape s{2, 1, 3, 2, 2};
  for (const HingeSign sign : {HingeSign::standard, HingeSign::paper}) {
    CHECK(d_hinge_loss(Tensor::zeros(s), Tensor::zeros(s), sign).item() == 2.0);
  }
  CHECK(d_hinge_loss(Tensor::full(s, 1.0), Tensor::full(s, -1.0)).item() == 0.0);
  CHECK(d_hinge_loss(Tensor::full(s, -1.0), Tensor::full(s, 1.0), HingeSign::paper).item() == 0.0);
  CHECK(d_hinge_loss(Tensor::full(s, 0.5), Tensor::full(s, 0.25)).item() == doctest::Approx(0.5 + 1.25));
  CHECK(d_hinge_loss(Tensor::full(s, 0.5), Tensor::full(s, 0.25), HingeSign::paper).item() ==
        doctest::Approx(1.5 + 0.75));

  CHECK(g_adv_loss(Tensor::zeros(s)).item() == 0.0);
  CHECK(g_adv_loss(Tensor::full(s, 0.7)).item() == -0.7);
  const Tensor a = random_tensor(s, 19), b = random_tensor(s, 20);
  CHECK(g_adv_loss(ops::add(ops::scale(a, 2.0), ops::scale(b, -3.0))).item() ==
        doctest::Approx(2.0 * g_adv_loss(a).item() - 3.0 * g_adv_loss(b).item()).epsilon(1e-14));
}

TEST_CASE("losses are nonnegative") {
  const FeatureExtractor fx = small_extractor(21);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor o = random_tensor({1, 3, 2, 8, 8}, 100 + seed, DType::f64, -3, 3);
    const Tensor v = random_tensor({1, 3, 2, 8, 8}, 200 + seed, DType::f64, -3, 3);
    CHECK(l1_loss(o, v).item() >= 0.0);
    CHECK(perceptual_loss(o, v, fx).item() >= 0.0);
    CHECK(style_loss(o, v, fx).item() >= 0.0);
    const Tensor r = random_tensor({1, 1, 2, 2, 2}, 300 + seed, DType::f64, -4, 4);
    const Tensor f = random_tensor({1, 1, 2, 2, 2}, 400 + seed, DType::f64, -4, 4);
    CHECK(d_hinge_loss(r, f).item() >= 0.0);
    CHECK(d_hinge_loss(r, f, HingeSign::paper).item() >= 0.0);
  }
}

TEST_CASE("reconstruction losses are minimized at the target") {
  const FeatureExtractor fx = small_extractor(22);
  const Tensor v = random_tensor({1, 3, 2, 8, 8}, 23);
  const Tensor noise = random_tensor({1, 3, 2, 8, 8}, 24);
  auto sweep = [&](auto loss) {
    double best = INFINITY, arg = NAN;
    for (int i = -10; i <= 10; ++i) {
      const double alpha = 0.1 * i;
      const double value = loss(ops::add(v, ops::scale(noise, alpha))).item();
      if (value < best) {
        best = value;
        arg = alpha;
      }
    }
    return arg;
  };
  CHECK(sweep([&](const Tensor& o) { return l1_loss(o, v); }) == 0.0);
  CHECK(sweep([&](const Tensor& o) { return perceptual_loss(o, v, fx); }) == 0.0);
  CHECK(sweep([&](const Tensor& o) { return style_loss(o, v, fx); }) == 0.0);
}

TEST_CASE("total_loss arithmetic") {
  LossComponents c{Tensor::scalar(0.3), Tensor::scalar(2.0), Tensor::scalar(0.05),
                   Tensor::scalar(-0.4)};
  LossWeights w;
  CHECK(total_loss(c, w).item() ==
        doctest::Approx(1.0 * 0.3 + 0.1 * 2.0 + 10.0 * 0.05 + 0.01 * -0.4).epsilon(1e-15));
  LossWeights only{1.0, 0.0, 0.0, 0.0};
  CHECK(total_loss(c, only).item() == 0.3);
  LossWeights twice{2.0, 0.2, 20.0, 0.02};
  CHECK(total_loss(c, twice).item() == doctest::Approx(2.0 * total_loss(c, w).item()));
  LossComponents no_adv{c.l1, c.perc, c.style, Tensor()};
  CHECK(total_loss(no_adv, w).item() == doctest::Approx(0.3 + 0.2 + 0.5));
  CHECK_THROWS_AS(LossWeights({0, 0, 0, 0}).validate(), ShapeError);
  CHECK_THROWS_AS(LossWeights({-1, 0, 0, 0}).validate(), ShapeError);
}

TEST_CASE("total loss gradient with respect to the output") {
  const FeatureExtractor fx = small_extractor(25);
  const Tensor v = random_tensor({1, 3, 2, 8, 8}, 26);
  Tensor o = random_tensor({1, 3, 2, 8, 8}, 27).set_requires_grad(true);
  const LossWeights w;
  auto f = [&] {
    LossComponents c{l1_loss(o, v), perceptual_loss(o, v, fx), style_loss(o, v, fx), Tensor()};
    return total_loss(c, w);
  };
  {
    Tape tape;
    Tape::Recording rec(tape);
    tape.backward(f());
  }
  CHECK(max_rel_err(o.grad(), numeric_grad(f, o, Tensor::scalar(1.0))) < 1e-4);
}
