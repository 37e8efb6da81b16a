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
#include <optional>
#include <string>
#include <vector>

#include "lgtsm/maskgen.hpp"
#include "lgtsm/netpbm.hpp"
#include "lgtsm/tensor.hpp"

namespace lgtsm {

// A clip of 8-bit RGB frames sharing one size.
struct FrameSequence {
  std::vector<RgbImage> frames;
  std::optional<double> fps;

  std::int64_t length() const { return static_cast<std::int64_t>(frames.size()); }
  std::int64_t height() const { return frames.empty() ? 0 : frames.front().height; }
  std::int64_t width() const { return frames.empty() ? 0 : frames.front().width; }
  // Throws DataError if frames disagree in size.
  void validate() const;

  bool operator==(const FrameSequence& other) const { return frames == other.frames; }
};

// Reads frame_00000.ppm, frame_00001.ppm, ... until the first gap. An
// optional "fps" file holds the frame rate as text.
FrameSequence read_frames(const std::filesystem::path& dir);
void write_frames(const std::filesystem::path& dir, const FrameSequence& seq);

double normalize_value(std::uint8_t v);
// Clamps to [0,255] after mapping back, rounds half up.
std::uint8_t denormalize_value(double x);

// [1,3,L,H,W] in [-1,1].
Tensor normalize(const FrameSequence& seq, DType dtype = DType::f32);
// Batch entry b of a [B,3,L,H,W] tensor back to 8-bit frames.
FrameSequence denormalize(const Tensor& video, std::int64_t b = 0);

enum class ShapeKind : std::uint8_t { rect, disk };
enum class Background : std::uint8_t { constant, gradient };

struct SceneShape {
  ShapeKind kind = ShapeKind::rect;
  // Top-left corner for rects, center for disks, at t = 0.
  std::int64_t y = 0, x = 0;
  // Rect extent, or radius (in h) for disks.
  std::int64_t h = 8, w = 8;
  // Pixels per frame; reflected at the borders.
  std::int64_t vy = 0, vx = 0;
  std::uint8_t color[3] = {255, 255, 255};
};

struct SyntheticSceneSpec {
  std::uint64_t seed = 0;
  std::int64_t length = 8, height = 64, width = 64;
  Background background = Background::constant;
  std::uint8_t bg_a[3] = {0, 0, 0};
  std::uint8_t bg_b[3] = {0, 0, 0};  // right edge color for gradients
  std::vector<SceneShape> shapes;

  // 1-4 shapes with random kinds, sizes, colors and speeds up to 4 px/frame.
  static SyntheticSceneSpec random(std::uint64_t seed, std::int64_t length, std::int64_t height,
                                   std::int64_t width);
  void validate() const;
};

// Shapes move with constant velocity and bounce so they stay inside the frame.
FrameSequence synth_video(const SyntheticSceneSpec& spec);

class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<FrameSequence> clips);

  // n random synthetic scenes; clip i uses seed derived from (seed, i).
  static Dataset synthetic(std::size_t n, std::uint64_t seed, std::int64_t length,
                           std::int64_t height, std::int64_t width);
  // Plain text, one clip directory per line; blank lines and # comments are
  // skipped; relative paths resolve against the manifest's directory.
  static Dataset from_manifest(const std::filesystem::path& manifest);

  std::size_t size() const { return clips_.size(); }
  const FrameSequence& at(std::size_t i) const { return clips_.at(i); }
  std::int64_t length() const;
  std::int64_t height() const;
  std::int64_t width() const;

 private:
  std::vector<FrameSequence> clips_;
};

struct Batch {
  Tensor video;         // [B,3,L,H,W] in [-1,1]
  Tensor mask;          // [B,1,L,H,W] in {0,1}
  Tensor masked_video;  // video * (1 - mask)
  std::vector<MaskVideo> masks;
  std::vector<std::size_t> indices;

  std::int64_t size() const { return video.defined() ? video.dim(0) : 0; }
  // Throws ShapeError unless masked_video == video * (1 - mask) exactly.
  void check_consistent() const;
};

// Deterministic flat stream over the dataset: entry i of batch s is draw
// k = s*B + i, from epoch k / N. With shuffling each epoch is a seeded
// permutation, so every clip is visited once per epoch.
class BatchSampler {
 public:
  BatchSampler(std::size_t dataset_size, std::int64_t batch_size, std::uint64_t seed,
               bool shuffle = true);
  std::vector<std::size_t> indices(std::uint64_t step) const;
  std::int64_t batch_size() const { return batch_size_; }

 private:
  std::size_t n_;
  std::int64_t batch_size_;
  std::uint64_t seed_;
  bool shuffle_;
};

// Builds a batch from explicit clips; masks use seeds derived from
// (mask_spec.seed, position in batch).
Batch make_batch(const std::vector<const FrameSequence*>& clips, const MaskSpec& mask_spec,
                 DType dtype = DType::f32);
// Batch number `step` of the sampler's stream; mask seeds depend on
// (mask_spec.seed, step, i).
Batch make_batch(const Dataset& data, const BatchSampler& sampler, const MaskSpec& mask_spec,
                 std::uint64_t step, DType dtype = DType::f32);

// SplitMix64 finalizer, used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace lgtsm
