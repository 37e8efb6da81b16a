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
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lgtsm/adam.hpp"
#include "lgtsm/checkpoint.hpp"
#include "lgtsm/config.hpp"
#include "lgtsm/dataset.hpp"
#include "lgtsm/losses.hpp"
#include "lgtsm/networks.hpp"

namespace lgtsm {

// Loss terms of one optimization step. Finetune steps fill adv and d_loss.
struct StepLog {
  Stage stage = Stage::pretrain;
  std::uint64_t step = 0;  // 1-based within the stage
  double l1 = 0, perc = 0, style = 0;
  std::optional<double> adv, d_loss;
  double total = 0;  // lambda-weighted generator objective

  // "stage=... step=... l1=... perc=... style=... [adv=... d=...] total=..."
  std::string format(const LossWeights& w) const;
};

struct ValidationMetrics {
  double l1 = 0;             // full-frame mean |O - V| of the raw output
  double masked_mse = 0;     // composite vs truth on masked pixels, [0,1] scale
  double zero_fill_mse = 0;  // same for the masked input itself
};

struct EvalLog {
  Stage stage;
  std::uint64_t step;
  ValidationMetrics metrics;
};

struct TrainSummary {
  std::vector<StepLog> steps;
  std::vector<EvalLog> evals;
  std::filesystem::path last_checkpoint;
  bool plateau_stop = false;
};

struct TrainHooks {
  std::function<void(const StepLog&)> on_step;
  std::function<void(const EvalLog&)> on_eval;
  std::function<void(const std::filesystem::path&)> on_checkpoint;
};

// Two-stage trainer: generator-only pretraining on the reconstruction
// losses, then alternating discriminator and generator steps with the
// adversarial term added. Batches depend only on (seed, stage, step) and the
// saved RNG stream, so a resumed run replays the same trace.
class Trainer {
 public:
  Trainer(TrainConfig cfg, Dataset train, Dataset validation);

  // Loads weights, moments and counters. A finetune checkpoint cannot
  // resume a pretrain config; architecture keys must agree.
  void restore(const Checkpoint& ckpt);
  Checkpoint checkpoint() const;

  // One optimization step in the current stage.
  StepLog step();
  ValidationMetrics validate();

  // Runs the remaining steps of every stage from the current position.
  // Checkpoints go to cfg.out_dir unless write_checkpoints is false.
  TrainSummary run(const TrainHooks& hooks = {}, bool write_checkpoints = true);

  Stage stage() const { return stage_; }
  std::uint64_t stage_step() const { return step_; }
  const TrainConfig& config() const { return cfg_; }
  ModelBundle& models() { return models_; }
  const FeatureExtractor& extractor() const { return fx_; }

  static std::filesystem::path checkpoint_path(const TrainConfig& cfg, Stage stage,
                                               std::uint64_t step);

 private:
  Batch next_batch();
  void advance_stage();

  TrainConfig cfg_;
  Dataset train_, val_;
  ModelBundle models_;
  Adam adam_g_, adam_d_;
  FeatureExtractor fx_;
  BatchSampler sampler_;
  std::mt19937_64 rng_;
  Stage stage_;
  std::uint64_t step_ = 0;
  std::filesystem::path last_good_;
};

// Builds the train and validation sets a config describes.
std::pair<Dataset, Dataset> load_datasets(const TrainConfig& cfg);

// Perceptual feature extractor of a config: loaded from `extractor` when
// set, otherwise seeded from the config seed.
FeatureExtractor make_extractor(const TrainConfig& cfg);

// Fixed validation batch: every validation clip with seeded masks.
Batch validation_batch(const Dataset& val, const TrainConfig& cfg, DType dtype);

// Generator with the architecture and weights stored in a checkpoint;
// `causal` overrides the trained shift mode when set.
Generator generator_from_checkpoint(const Checkpoint& ckpt, std::optional<bool> causal = {});

// Copies values of src into dst (same shape); dtype is converted.
void assign_values(Tensor& dst, const Tensor& src, const std::string& name);

}  // namespace lgtsm
