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
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "lgtsm/errors.hpp"
#include "lgtsm/evaluate.hpp"
#include "lgtsm/gradcheck.hpp"
#include "lgtsm/ops.hpp"
#include "lgtsm/tape.hpp"
#include "test_support.hpp"

using namespace lgtsm;
using lgtsm::testing::random_tensor;

namespace {

Dataset small_set() { return Dataset::synthetic(3, 21, 2, 16, 16); }

FeatureExtractor small_extractor() { return FeatureExtractor::seeded_random(4, DType::f64); }

EvalOptions f64_options() {
  EvalOptions o;
  o.dtype = DType::f64;
  return o;
}

// y = x * x with a deliberately wrong derivative of 3x.
Tensor bad_square(const Tensor& x) {
  Tensor y = Tensor::zeros(x.shape(), x.dtype());
  for (std::int64_t i = 0; i < x.numel(); ++i) y.set(i, x.at(i) * x.at(i));
  Tape::record("bad_square", {x}, y, [x](const Tensor& g, std::span<Tensor> gi) {
    if (!gi[0].defined()) return;
    for (std::int64_t i = 0; i < x.numel(); ++i) gi[0].set(i, gi[0].at(i) + 3.0 * x.at(i) * g.at(i));
  });
  return y;
}

}  // namespace

TEST_CASE("bucket labels cover 0-70% in steps of ten") {
  const char* expected[] = {"0-10%", "10-20%", "20-30%", "30-40%", "40-50%", "50-60%", "60-70%"};
  for (int k = 0; k < 7; ++k) CHECK(bucket_label(k) == expected[k]);
}

TEST_CASE("a perfect inpainter scores zero in every bucket") {
  const Dataset data = small_set();
  const EvalReport report =
      evaluate([](const Batch& b) { return b.video.clone(); }, data, small_extractor(), f64_options());
  REQUIRE(report.buckets.size() == 7);
  for (int k = 0; k < 7; ++k) {
    const EvalBucket& b = report.buckets[static_cast<std::size_t>(k)];
    CHECK(b.label == bucket_label(k));
    CHECK(b.lo == doctest::Approx(0.1 * k));
    CHECK(b.hi == doctest::Approx(0.1 * (k + 1)));
    CHECK(b.samples == 3);
    CHECK(b.mse == 0.0);
    CHECK(b.masked_mse == 0.0);
    CHECK(b.proxy == 0.0);
  }
  CHECK(report.mse == 0.0);
  CHECK(report.proxy == 0.0);
}

TEST_CASE("zero fill scores match a direct recomputation") {
  const Dataset data = small_set();
  std::vector<Batch> seen;
  auto zero_fill = [&](const Batch& b) {
    seen.push_back(b);
    return Tensor::zeros(b.video.shape(), b.video.dtype());
  };
  const EvalReport report = evaluate(zero_fill, data, small_extractor(), f64_options());
  // Batches of two over three clips: two calls per bucket.
  REQUIRE(seen.size() == 14);
  double all_sq = 0, all_n = 0;
  for (int k = 0; k < 7; ++k) {
    double sq = 0, n = 0, msq = 0, mn = 0;
    for (int j = 0; j < 2; ++j) {
      const Batch& b = seen[static_cast<std::size_t>(2 * k + j)];
      for (const auto& m : b.masks) {
        CHECK(m.ratio() >= 0.1 * k);
        CHECK(m.ratio() < 0.1 * (k + 1));
      }
      const std::int64_t plane = b.mask.numel() / b.size();
      for (std::int64_t i = 0; i < b.video.numel(); ++i) {
        const std::int64_t bi = i / (3 * plane), p = i % plane;
        const double v = b.video.at(i);
        const bool masked = b.mask.at(bi * plane + p) == 1.0;
        const double d = masked ? v / 2.0 : 0.0;
        sq += d * d;
        n += 1;
        if (masked) {
          msq += d * d;
          mn += 1;
        }
      }
    }
    const EvalBucket& bucket = report.buckets[static_cast<std::size_t>(k)];
    CHECK(bucket.mse == doctest::Approx(sq / n).epsilon(1e-12));
    CHECK(bucket.masked_mse == doctest::Approx(mn > 0 ? msq / mn : 0.0).epsilon(1e-12));
    CHECK(bucket.proxy > 0.0);
    all_sq += sq;
    all_n += n;
  }
  CHECK(report.mse == doctest::Approx(all_sq / all_n).epsilon(1e-12));
}

TEST_CASE("every model sees the same masks") {
  const Dataset data = small_set();
  std::vector<std::vector<double>> first, second;
  evaluate([&](const Batch& b) { first.push_back(b.mask.to_vector()); return b.video; }, data,
           small_extractor(), f64_options());
  evaluate(
      [&](const Batch& b) {
        second.push_back(b.mask.to_vector());
        return Tensor::zeros(b.video.shape(), b.video.dtype());
      },
      data, small_extractor(), f64_options());
  CHECK(first == second);
  EvalOptions other = f64_options();
  other.seed = 8;
  std::vector<std::vector<double>> third;
  evaluate([&](const Batch& b) { third.push_back(b.mask.to_vector()); return b.video; }, data,
           small_extractor(), other);
  CHECK(first != third);
}

TEST_CASE("evaluate validates its inputs") {
  const Dataset data = small_set();
  const auto fx = small_extractor();
  auto identity = [](const Batch& b) { return b.video; };
  EvalOptions o = f64_options();
  o.buckets = 0;
  CHECK_THROWS_AS(evaluate(identity, data, fx, o), ShapeError);
  o.buckets = 11;
  CHECK_THROWS_AS(evaluate(identity, data, fx, o), ShapeError);
  CHECK_THROWS_AS(evaluate(identity, Dataset{}, fx, f64_options()), DataError);
  CHECK_THROWS_AS(evaluate([](const Batch& b) { return b.mask; }, data, fx, f64_options()),
                  ShapeError);
}

TEST_CASE("report formatting and monotonicity") {
  EvalReport r;
  for (int k = 0; k < 3; ++k) {
    EvalBucket b;
    b.label = bucket_label(k);
    b.samples = 4;
    b.mse = 0.01 * (k + 1);
    r.buckets.push_back(b);
  }
  CHECK(r.mse_monotone());
  const std::string text = r.format();
  CHECK(text.find("10-20%") != std::string::npos);
  CHECK(text.find("monotone in mask ratio: yes") != std::string::npos);
  r.buckets[2].mse = 0.005;
  CHECK_FALSE(r.mse_monotone());
  CHECK(r.format().find("monotone in mask ratio: no") != std::string::npos);
}

TEST_CASE("the built-in gradient suite passes") {
  const GradCheckReport report = run_gradcheck(gradcheck_cases());
  INFO(report.format());
  CHECK(report.passed());
  CHECK(report.failures().empty());
  std::set<std::string> names;
  for (const auto& r : report.results) {
    CHECK(names.insert(r.name).second);
    CHECK(r.coordinates > 0);
    CHECK(r.max_rel_err < 1e-4);
  }
  for (auto c : {GradComponent::ops, GradComponent::layer, GradComponent::generator,
                 GradComponent::losses}) {
    const auto cases = gradcheck_cases(c);
    CHECK_FALSE(cases.empty());
    for (const auto& gc : cases) CHECK(gc.component == c);
  }
  std::size_t total = 0;
  for (auto c : {GradComponent::ops, GradComponent::layer, GradComponent::generator,
                 GradComponent::losses}) {
    total += gradcheck_cases(c).size();
  }
  CHECK(total == report.results.size());
}

TEST_CASE("a corrupted backward rule is reported by name") {
  Tensor x = random_tensor({5}, 3, DType::f64, 0.5, 1.5);
  x.set_requires_grad(true);
  GradCase bad{"bad_square", GradComponent::ops,
               [](const std::vector<Tensor>& in) { return bad_square(in[0]); }, {x}};
  Tensor y = random_tensor({2, 3}, 4);
  y.set_requires_grad(true);
  GradCase good{"mul_self", GradComponent::ops,
                [](const std::vector<Tensor>& in) { return ops::mul(in[0], in[0]); }, {y}};

  const GradCheckResult r = check_gradients(bad);
  CHECK_FALSE(r.passed);
  CHECK(r.coordinates == 5);
  // Analytic 3x against numeric 2x: relative error 1/3.
  CHECK(r.max_rel_err == doctest::Approx(1.0 / 3.0).epsilon(1e-5));
  CHECK(r.worst.rfind("input 0[", 0) == 0);

  const GradCheckReport report = run_gradcheck({good, bad});
  CHECK_FALSE(report.passed());
  CHECK(report.failures() == std::vector<std::string>{"bad_square"});
  const std::string text = report.format();
  CHECK(text.find("mul_self") != std::string::npos);
  CHECK(text.find("PASS") != std::string::npos);
  CHECK(text.find("FAIL at input 0[") != std::string::npos);
  CHECK(text.find("2 cases, 1 failed") != std::string::npos);
}

TEST_CASE("only inputs that require gradients are checked") {
  Tensor a = random_tensor({3}, 5);
  Tensor b = random_tensor({4}, 6);
  a.set_requires_grad(true);
  GradCase c{"partial", GradComponent::ops,
             [](const std::vector<Tensor>& in) {
               return ops::add(ops::sum(ops::mul(in[0], in[0])), ops::sum(in[1]));
             },
             {a, b}};
  const GradCheckResult r = check_gradients(c);
  CHECK(r.passed);
  CHECK(r.coordinates == 3);
}

TEST_CASE("gradcheck components parse by name") {
  for (auto c : {GradComponent::all, GradComponent::ops, GradComponent::layer,
                 GradComponent::generator, GradComponent::losses}) {
    CHECK(parse_grad_component(grad_component_name(c)) == c);
  }
  CHECK_THROWS_AS(parse_grad_component("kernels"), ShapeError);
}
