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
#include <filesystem>
#include <map>
#include <string>

#include "lgtsm/losses.hpp"
#include "lgtsm/maskgen.hpp"
#include "lgtsm/networks.hpp"
#include "lgtsm/shift.hpp"

namespace lgtsm {

enum class Stage : std::uint8_t { pretrain = 0, finetune = 1 };

const char* stage_name(Stage s);
Stage parse_stage(const std::string& name);

// Everything a training run depends on. The text form is line based
// `key = value`, with `#` comments; see to_text() for the key list.
struct TrainConfig {
  Stage stage = Stage::pretrain;
  std::int64_t pretrain_steps = 300;
  std::int64_t finetune_steps = 0;
  double lr_g = 1e-4;
  double lr_d = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  LossWeights weights;
  HingeSign hinge = HingeSign::standard;

  std::int64_t batch = 2;
  std::int64_t length = 8;
  std::int64_t height = 64;
  std::int64_t width = 64;
  std::uint64_t seed = 1;

  // Architecture.
  std::int64_t base_channels = 32;
  std::int64_t kernel = 5;
  std::int64_t d_base_channels = 32;
  bool causal = false;
  ShiftMode shift_mode = ShiftMode::learnable;
  bool spectral_norm_g = true;
  bool spectral_norm_d = true;
  DType dtype = DType::f32;

  // Data. An empty manifest selects the synthetic moving-shapes set.
  std::string manifest;
  std::int64_t train_clips = 64;
  std::int64_t val_clips = 8;
  MaskKind mask_kind = MaskKind::stroke;
  double mask_lo = 0.1;
  double mask_hi = 0.2;
  int mask_motion = 2;
  // Optional feature-extractor weights; empty means the seeded default.
  std::string extractor;

  std::int64_t eval_every = 50;
  std::int64_t checkpoint_every = 100;
  // Stop pretraining when validation l1 improves by less than 1% across
  // this many evaluations; 0 disables.
  std::int64_t plateau_evals = 3;
  std::string out_dir = "run";

  void validate() const;
  std::int64_t steps_for(Stage s) const {
    return s == Stage::pretrain ? pretrain_steps : finetune_steps;
  }

  // Applies one key; throws ShapeError naming unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  std::string to_text() const;
  static TrainConfig parse(const std::string& text);
  static TrainConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  GeneratorConfig generator_config() const;
  DiscriminatorConfig discriminator_config() const;
  MaskSpec mask_spec(std::uint64_t mask_seed) const;

  // Keys that fix parameter shapes; a resumed run must agree on them.
  static const char* const* architecture_keys();
  std::map<std::string, std::string> as_map() const;

  bool operator==(const TrainConfig& other) const { return to_text() == other.to_text(); }
};

// Shortest round-trippable decimal text for a double.
std::string format_double(double v);

}  // namespace lgtsm
