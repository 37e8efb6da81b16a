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

#include "lgtsm/errors.hpp"
#include "lgtsm/tensor.hpp"

namespace lgtsm {

// Binary occlusion volume, 1 = missing pixel to inpaint.
class MaskVideo {
 public:
  MaskVideo() = default;
  MaskVideo(std::int64_t frames, std::int64_t height, std::int64_t width);
  // bits must hold frames*height*width values in {0,1}.
  MaskVideo(std::int64_t frames, std::int64_t height, std::int64_t width,
            std::vector<std::uint8_t> bits);

  // Axis-aligned rectangle at the same position in every frame.
  static MaskVideo box(std::int64_t frames, std::int64_t height, std::int64_t width,
                       std::int64_t top, std::int64_t left, std::int64_t box_h,
                       std::int64_t box_w);

  std::int64_t frames() const { return frames_; }
  std::int64_t height() const { return height_; }
  std::int64_t width() const { return width_; }
  std::uint8_t at(std::int64_t t, std::int64_t y, std::int64_t x) const {
    return bits_[static_cast<std::size_t>((t * height_ + y) * width_ + x)];
  }
  const std::vector<std::uint8_t>& bits() const { return bits_; }
  std::int64_t masked_count() const { return masked_; }
  // Fraction of masked pixels over the whole volume.
  double ratio() const;
  // Fraction of masked pixels in frame t.
  double frame_ratio(std::int64_t t) const;

  // [1,1,L,H,W] tensor of 0/1 values.
  Tensor to_tensor(DType dtype) const;

  bool operator==(const MaskVideo& other) const {
    return frames_ == other.frames_ && height_ == other.height_ && width_ == other.width_ &&
           bits_ == other.bits_;
  }

 private:
  std::int64_t frames_ = 0, height_ = 0, width_ = 0;
  std::vector<std::uint8_t> bits_;
  std::int64_t masked_ = 0;
};

double ratio(const MaskVideo& mask);

enum class MaskKind : std::uint8_t { stroke, bbox, object_like };

const char* mask_kind_name(MaskKind kind);
MaskKind parse_mask_kind(const std::string& name);

struct MaskSpec {
  MaskKind kind = MaskKind::stroke;
  // Accepted volume ratios [lo, hi); hi == 1 includes a fully masked video.
  double ratio_lo = 0.1;
  double ratio_hi = 0.2;
  // Largest per-frame rigid translation, in pixels.
  int motion = 2;
  std::uint64_t seed = 0;
  int max_attempts = 100;

  void validate() const;
};

class MaskGenerationError : public DataError {
 public:
  MaskGenerationError(const std::string& message, double best_ratio)
      : DataError(message), best_ratio_(best_ratio) {}
  double best_ratio() const { return best_ratio_; }

 private:
  double best_ratio_;
};

// Free-form mask synthesis. A pattern is drawn once on a padded canvas and
// translated rigidly along a bounded random walk; drawing stops as soon as
// the volume ratio reaches a target sampled from the accepted range. Throws
// MaskGenerationError carrying the closest ratio when no attempt lands in
// range. Requires H,W >= 16.
MaskVideo generate_mask(const MaskSpec& spec, std::int64_t frames, std::int64_t height,
                        std::int64_t width);

// video * (1 - mask), mask broadcast over channels. video [B,C,L,H,W], mask
// [B,1,L,H,W].
Tensor apply_mask(const Tensor& video, const Tensor& mask);

// Intersection over union of the masked sets of frames a and b.
double frame_iou(const MaskVideo& mask, std::int64_t a, std::int64_t b);

// Per-frame P4 files frame_%05d.pbm.
void write_mask_frames(const std::filesystem::path& dir, const MaskVideo& mask);
MaskVideo read_mask_frames(const std::filesystem::path& dir);

}  // namespace lgtsm
