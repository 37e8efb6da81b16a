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
#include <string>
#include <vector>

#include "lgtsm/adam.hpp"
#include "lgtsm/config.hpp"
#include "lgtsm/tensor.hpp"

namespace lgtsm {

inline constexpr std::uint8_t kCheckpointVersion = 1;

// Serialized training state. Layout: "LGTSMCK1", version byte, stage byte,
// step, Adam step counters, RNG state text, config text, a manifest of
// (name, dtype, dims, payload offset) entries, little-endian payloads, and a
// CRC32 of everything before it.
struct Checkpoint {
  Stage stage = Stage::pretrain;
  std::uint64_t step = 0;
  std::uint64_t adam_g_steps = 0;
  std::uint64_t adam_d_steps = 0;
  std::string rng_state;
  std::string config_text;
  // Parameters, spectral-norm vectors ("<name>.u") and Adam moments
  // ("adam.<G|D>.<m|v>.<name>").
  std::vector<Parameter> tensors;

  // Undefined tensor when absent.
  Tensor find(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes,
                             const std::string& what = "checkpoint");
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lgtsm
