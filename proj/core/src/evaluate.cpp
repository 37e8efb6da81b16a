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

#include "lgtsm/evaluate.hpp"

#include <cstdio>

#include "lgtsm/errors.hpp"
#include "lgtsm/networks.hpp"
#include "lgtsm/tape.hpp"

namespace lgtsm {

std::string bucket_label(int k) {
  return std::to_string(10 * k) + "-" + std::to_string(10 * (k + 1)) + "%";
}

bool EvalReport::mse_monotone() const {
  for (std::size_t i = 1; i < buckets.size(); ++i) {
    if (buckets[i].mse < buckets[i - 1].mse) return false;
  }
  return true;
}

std::string EvalReport::format() const {
  std::string out = "bucket     samples  mse          masked_mse   proxy(PROXY)\n";
  char line[160];
  for (const auto& b : buckets) {
    std::snprintf(line, sizeof(line), "%-10s %7lld  %.6e %.6e %.6e\n", b.label.c_str(),
                  static_cast<long long>(b.samples), b.mse, b.masked_mse, b.proxy);
    out += line;
  }
  std::snprintf(line, sizeof(line), "%-10s %7s  %.6e %12s %.6e\n", "all", "", mse, "", proxy);
  out += line;
  out += std::string("mse monotone in mask ratio: ") + (mse_monotone() ? "yes" : "no") + "\n";
  return out;
}

EvalReport evaluate(const InpaintFn& inpaint, const Dataset& data, const FeatureExtractor& fx,
                    const EvalOptions& options) {
  if (options.buckets < 1 || options.buckets > 10) {
    throw ShapeError("evaluate: bucket count must lie in [1, 10]");
  }
  if (data.size() == 0) throw DataError("evaluate: empty dataset");
  Tape::Paused paused;
  EvalReport report;
  double total_sq = 0, total_proxy = 0;
  std::int64_t total_elems = 0, total_samples = 0;
  for (int k = 0; k < options.buckets; ++k) {
    EvalBucket bucket;
    bucket.label = bucket_label(k);
    bucket.lo = 0.1 * k;
    bucket.hi = 0.1 * (k + 1);
    double sq = 0, masked_sq = 0, masked = 0, proxy = 0;
    std::int64_t elems = 0;
    for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(options.batch)) {
      const std::size_t end = std::min(data.size(), start + static_cast<std::size_t>(options.batch));
      std::vector<const FrameSequence*> clips;
      std::vector<MaskVideo> masks;
      for (std::size_t i = start; i < end; ++i) clips.push_back(&data.at(i));
      MaskSpec spec;
      spec.kind = options.kind;
      spec.ratio_lo = bucket.lo;
      spec.ratio_hi = bucket.hi;
      spec.motion = options.motion;
      spec.seed = mix_seed(mix_seed(options.seed, static_cast<std::uint64_t>(k)), start);
      const Batch batch = make_batch(clips, spec, options.dtype);
      const Tensor generated = inpaint(batch);
      if (generated.shape() != batch.video.shape()) {
        throw ShapeError("evaluate: inpaint returned " + shape_str(generated.shape()) +
                         ", expected " + shape_str(batch.video.shape()));
      }
      const Tensor comp = composite_output(generated, batch.video, batch.mask);
      const auto c = comp.to_vector(), v = batch.video.to_vector(), m = batch.mask.to_vector();
      const std::int64_t B = batch.size(), plane = batch.mask.numel() / B;
      for (std::int64_t b = 0; b < B; ++b) {
        for (std::int64_t ch = 0; ch < 3; ++ch) {
          for (std::int64_t p = 0; p < plane; ++p) {
            const auto idx = static_cast<std::size_t>((b * 3 + ch) * plane + p);
            const double d = (c[idx] - v[idx]) / 2.0;
            sq += d * d;
            if (m[static_cast<std::size_t>(b * plane + p)] != 0.0) {
              masked_sq += d * d;
              masked += 1.0;
            }
          }
        }
      }
      elems += static_cast<std::int64_t>(c.size());
      proxy += perceptual_loss(comp, batch.video, fx).item() * static_cast<double>(B);
      bucket.samples += B;
    }
    bucket.mse = sq / static_cast<double>(elems);
    bucket.masked_mse = masked > 0 ? masked_sq / masked : 0.0;
    bucket.proxy = proxy / static_cast<double>(bucket.samples);
    total_sq += sq;
    total_elems += elems;
    total_proxy += proxy;
    total_samples += bucket.samples;
    report.buckets.push_back(bucket);
  }
  report.mse = total_sq / static_cast<double>(total_elems);
  report.proxy = total_proxy / static_cast<double>(total_samples);
  return report;
}

}  // namespace lgtsm
