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

#include "lgtsm/dataset.hpp"
#include "lgtsm/losses.hpp"
#include "lgtsm/maskgen.hpp"

namespace lgtsm {

struct EvalBucket {
  std::string label;  // "0-10%", ..., "60-70%"
  double lo = 0, hi = 0;
  std::int64_t samples = 0;
  double mse = 0;         // composite vs truth over all pixels, [0,1] scale
  double masked_mse = 0;  // same, restricted to masked pixels
  double proxy = 0;       // perceptual distance under the fixed extractor
};

struct EvalReport {
  std::vector<EvalBucket> buckets;
  double mse = 0;
  double proxy = 0;
  // Soft expectation for trained models; reported, never enforced.
  bool mse_monotone() const;
  std::string format() const;
};

// Returns the raw generator output for a batch; evaluate composites it.
using InpaintFn = std::function<Tensor(const Batch&)>;

struct EvalOptions {
  int buckets = 7;  // ranges [0.1k, 0.1(k+1)) for k < buckets
  MaskKind kind = MaskKind::stroke;
  int motion = 2;
  std::uint64_t seed = 7;
  std::int64_t batch = 2;
  DType dtype = DType::f32;
};

// Every clip is scored once per bucket with a mask seeded by (seed, bucket,
// clip), so two models see identical masks.
EvalReport evaluate(const InpaintFn& inpaint, const Dataset& data, const FeatureExtractor& fx,
                    const EvalOptions& options = {});

// Label of bucket k: "10k-10(k+1)%".
std::string bucket_label(int k);

}  // namespace lgtsm
