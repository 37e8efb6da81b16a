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

#include "lgtsm/losses.hpp"

#include <random>

#include "binary_io.hpp"
#include "lgtsm/gated_layer.hpp"
#include "lgtsm/ops.hpp"

namespace lgtsm {

namespace {

constexpr std::string_view kExtractorMagic = "LGTSMFX1";

}  // namespace

FeatureExtractor::FeatureExtractor(std::vector<Stage> stages) : stages_(std::move(stages)) {
  if (stages_.empty()) throw ShapeError("feature extractor needs at least one stage");
  for (std::size_t i = 1; i < stages_.size(); ++i) {
    if (stages_[i].weight.dim(1) != stages_[i - 1].weight.dim(0)) {
      throw ShapeError("feature extractor stage " + std::to_string(i) +
                       " input channels do not match the previous stage output");
    }
  }
  for (auto& s : stages_) s.weight.set_requires_grad(false);
}

FeatureExtractor FeatureExtractor::seeded_random(std::uint64_t seed, DType dtype,
                                                 std::vector<std::int64_t> channels) {
  std::mt19937_64 rng(seed);
  std::vector<Stage> stages;
  std::int64_t in = 3;
  for (auto c : channels) {
    stages.push_back({he_normal({c, in, 3, 3}, dtype, rng), 2, 0.2});
    in = c;
  }
  return FeatureExtractor(std::move(stages));
}

FeatureExtractor FeatureExtractor::load(const std::filesystem::path& path, DType dtype) {
  const auto bytes = detail::read_file(path.string());
  detail::ByteReader in(bytes.data(), bytes.size(), "feature extractor " + path.string());
  if (in.str(kExtractorMagic.size()) != kExtractorMagic) {
    throw DataError("feature extractor " + path.string() + ": bad magic, expected LGTSMFX1");
  }
  std::vector<Stage> stages;
  while (!in.done()) {
    Shape dims;
    for (int i = 0; i < 4; ++i) dims.push_back(in.uint<std::uint32_t>());
    Tensor w = Tensor::zeros(dims, dtype);
    in.need(static_cast<std::size_t>(w.numel()) * 4);
    for (std::int64_t i = 0; i < w.numel(); ++i) w.set(i, in.f32());
    stages.push_back({w, 2, 0.2});
  }
  return FeatureExtractor(std::move(stages));
}

void FeatureExtractor::save(const std::filesystem::path& path) const {
  detail::ByteWriter out;
  out.str(kExtractorMagic);
  for (const auto& s : stages_) {
    for (auto d : s.weight.shape()) out.uint(static_cast<std::uint32_t>(d));
    for (std::int64_t i = 0; i < s.weight.numel(); ++i) {
      out.f32(static_cast<float>(s.weight.at(i)));
    }
  }
  detail::write_file(path.string(), out.buffer());
}

DType FeatureExtractor::dtype() const { return stages_.front().weight.dtype(); }

std::vector<Tensor> FeatureExtractor::features(const Tensor& video) const {
  std::vector<Tensor> out;
  Tensor x = video;
  for (const auto& s : stages_) {
    ops::Conv2dOptions conv;
    conv.stride = s.stride;
    x = ops::conv2d_per_frame(x, s.weight, Tensor(), conv);
    if (s.slope != 1.0) x = ops::leaky_relu(x, s.slope);
    out.push_back(x);
  }
  return out;
}

Tensor l1_loss(const Tensor& output, const Tensor& target) {
  return ops::mean(ops::abs(ops::sub(output, target)));
}

Tensor masked_l1_loss(const Tensor& output, const Tensor& target, const Tensor& mask,
                      double mask_weight) {
  const Tensor m = ops::broadcast_channels(mask, output.dim(1));
  const Tensor weights = ops::add_scalar(ops::scale(m, mask_weight - 1.0), 1.0);
  double total = 0.0;
  for (std::int64_t i = 0; i < weights.numel(); ++i) total += weights.at(i);
  return ops::scale(ops::sum(ops::mul(weights, ops::abs(ops::sub(output, target)))), 1.0 / total);
}

Tensor perceptual_loss(const std::vector<Tensor>& fo, const std::vector<Tensor>& fv) {
  if (fo.size() != fv.size() || fo.empty()) {
    throw ShapeError("perceptual_loss: feature stage counts differ");
  }
  Tensor total;
  for (std::size_t p = 0; p < fo.size(); ++p) {
    const Tensor& f = fo[p];
    const double per_frame = static_cast<double>(f.dim(1) * f.dim(3) * f.dim(4));
    const double batch = static_cast<double>(f.dim(0));
    Tensor term = ops::scale(ops::sum(ops::abs(ops::sub(fo[p], fv[p]))), 1.0 / (per_frame * batch));
    total = total.defined() ? ops::add(total, term) : term;
  }
  return total;
}

Tensor style_loss(const std::vector<Tensor>& fo, const std::vector<Tensor>& fv) {
  if (fo.size() != fv.size() || fo.empty()) {
    throw ShapeError("style_loss: feature stage counts differ");
  }
  Tensor total;
  for (std::size_t p = 0; p < fo.size(); ++p) {
    const double cp = static_cast<double>(fo[p].dim(1));
    const double batch = static_cast<double>(fo[p].dim(0));
    const Tensor diff = ops::sub(ops::gram_matrix(fo[p]), ops::gram_matrix(fv[p]));
    Tensor term = ops::scale(ops::sum(ops::abs(diff)), 1.0 / (cp * cp * batch));
    total = total.defined() ? ops::add(total, term) : term;
  }
  return total;
}

Tensor perceptual_loss(const Tensor& output, const Tensor& target, const FeatureExtractor& fx) {
  return perceptual_loss(fx.features(output), fx.features(target));
}

Tensor style_loss(const Tensor& output, const Tensor& target, const FeatureExtractor& fx) {
  return style_loss(fx.features(output), fx.features(target));
}

Tensor d_hinge_loss(const Tensor& real, const Tensor& fake, HingeSign sign) {
  const double s = sign == HingeSign::standard ? -1.0 : 1.0;
  const Tensor real_term = ops::mean(ops::relu(ops::add_scalar(ops::scale(real, s), 1.0)));
  const Tensor fake_term = ops::mean(ops::relu(ops::add_scalar(ops::scale(fake, -s), 1.0)));
  return ops::add(real_term, fake_term);
}

Tensor g_adv_loss(const Tensor& fake) { return ops::scale(ops::mean(fake), -1.0); }

void LossWeights::validate() const {
  if (l1 < 0 || perc < 0 || style < 0 || adv < 0) {
    throw ShapeError("loss weights must be nonnegative");
  }
  if (l1 == 0 && perc == 0 && style == 0 && adv == 0) {
    throw ShapeError("at least one loss weight must be positive");
  }
}

Tensor total_loss(const LossComponents& c, const LossWeights& w) {
  w.validate();
  Tensor total;
  auto accumulate = [&](const Tensor& term, double weight) {
    if (!term.defined()) return;
    Tensor weighted = ops::scale(term, weight);
    total = total.defined() ? ops::add(total, weighted) : weighted;
  };
  accumulate(c.l1, w.l1);
  accumulate(c.perc, w.perc);
  accumulate(c.style, w.style);
  accumulate(c.adv, w.adv);
  if (!total.defined()) throw ShapeError("total_loss: no loss components given");
  return total;
}

}  // namespace lgtsm
