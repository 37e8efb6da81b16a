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

#include "lgtsm/maskgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "lgtsm/netpbm.hpp"
#include "lgtsm/ops.hpp"

namespace lgtsm {

MaskVideo::MaskVideo(std::int64_t frames, std::int64_t height, std::int64_t width)
    : MaskVideo(frames, height, width,
                std::vector<std::uint8_t>(static_cast<std::size_t>(frames * height * width), 0)) {}

MaskVideo::MaskVideo(std::int64_t frames, std::int64_t height, std::int64_t width,
                     std::vector<std::uint8_t> bits)
    : frames_(frames), height_(height), width_(width), bits_(std::move(bits)) {
  if (frames < 0 || height < 0 || width < 0 ||
      bits_.size() != static_cast<std::size_t>(frames * height * width)) {
    throw ShapeError("MaskVideo: bit count does not match " + std::to_string(frames) + "x" +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  for (auto b : bits_) {
    if (b > 1) throw ShapeError("MaskVideo: values must be 0 or 1");
    masked_ += b;
  }
}

MaskVideo MaskVideo::box(std::int64_t frames, std::int64_t height, std::int64_t width,
                         std::int64_t top, std::int64_t left, std::int64_t box_h,
                         std::int64_t box_w) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(frames * height * width), 0);
  for (std::int64_t t = 0; t < frames; ++t) {
    for (std::int64_t y = std::max<std::int64_t>(top, 0); y < std::min(top + box_h, height); ++y) {
      for (std::int64_t x = std::max<std::int64_t>(left, 0); x < std::min(left + box_w, width);
           ++x) {
        bits[static_cast<std::size_t>((t * height + y) * width + x)] = 1;
      }
    }
  }
  return MaskVideo(frames, height, width, std::move(bits));
}

double MaskVideo::ratio() const {
  const std::int64_t total = frames_ * height_ * width_;
  return total == 0 ? 0.0 : static_cast<double>(masked_) / static_cast<double>(total);
}

double MaskVideo::frame_ratio(std::int64_t t) const {
  const auto begin = bits_.begin() + static_cast<std::ptrdiff_t>(t * height_ * width_);
  const auto n = std::count(begin, begin + static_cast<std::ptrdiff_t>(height_ * width_), 1);
  return static_cast<double>(n) / static_cast<double>(height_ * width_);
}

Tensor MaskVideo::to_tensor(DType dtype) const {
  Tensor t = Tensor::zeros({1, 1, frames_, height_, width_}, dtype);
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) t.set(static_cast<std::int64_t>(i), 1.0);
  }
  return t;
}

double ratio(const MaskVideo& mask) { return mask.ratio(); }

const char* mask_kind_name(MaskKind kind) {
  switch (kind) {
    case MaskKind::stroke: return "stroke";
    case MaskKind::bbox: return "bbox";
    case MaskKind::object_like: return "object_like";
  }
  return "?";
}

MaskKind parse_mask_kind(const std::string& name) {
  if (name == "stroke") return MaskKind::stroke;
  if (name == "bbox") return MaskKind::bbox;
  if (name == "object_like" || name == "object") return MaskKind::object_like;
  throw ShapeError("unknown mask kind '" + name + "' (expected stroke, bbox or object_like)");
}

void MaskSpec::validate() const {
  if (!(ratio_lo >= 0.0 && ratio_lo < ratio_hi && ratio_hi <= 1.0)) {
    throw ShapeError("mask ratio range must satisfy 0 <= lo < hi <= 1");
  }
  if (motion < 0) throw ShapeError("mask motion must be >= 0");
  if (max_attempts < 1) throw ShapeError("mask max_attempts must be >= 1");
}

namespace {

// Padded drawing surface. Frame t shows the window whose top-left canvas
// corner is (pad - dy_t, pad - dx_t). Each canvas pixel knows in how many
// frames it is visible, so the volume ratio updates in O(1) per pixel.
class Canvas {
 public:
  Canvas(std::int64_t frames, std::int64_t height, std::int64_t width, std::int64_t pad,
         std::vector<std::pair<std::int64_t, std::int64_t>> offsets)
      : frames_(frames),
        height_(height),
        width_(width),
        pad_(pad),
        ch_(height + 2 * pad),
        cw_(width + 2 * pad),
        offsets_(std::move(offsets)),
        bits_(static_cast<std::size_t>(ch_ * cw_), 0),
        vis_(static_cast<std::size_t>(ch_ * cw_), 0) {
    for (const auto& [dy, dx] : offsets_) {
      for (std::int64_t y = 0; y < height_; ++y) {
        for (std::int64_t x = 0; x < width_; ++x) {
          vis_[static_cast<std::size_t>((y + pad_ - dy) * cw_ + (x + pad_ - dx))] += 1;
        }
      }
    }
  }

  void clear() {
    std::fill(bits_.begin(), bits_.end(), 0);
    count_ = 0;
  }

  void set_target(std::int64_t target) { target_ = target; }
  bool reached() const { return count_ >= target_; }
  std::int64_t count() const { return count_; }
  std::int64_t total() const { return frames_ * height_ * width_; }

  // Frame-region bounds in canvas coordinates.
  std::int64_t top() const { return pad_; }
  std::int64_t left() const { return pad_; }
  std::int64_t bottom() const { return pad_ + height_ - 1; }
  std::int64_t right() const { return pad_ + width_ - 1; }

  void set(std::int64_t cy, std::int64_t cx) {
    if (cy < 0 || cy >= ch_ || cx < 0 || cx >= cw_) return;
    auto idx = static_cast<std::size_t>(cy * cw_ + cx);
    if (bits_[idx]) return;
    bits_[idx] = 1;
    count_ += vis_[idx];
  }

  // Stamps a filled disc, stopping early once the target is reached.
  void disc(double cy, double cx, double r) {
    const auto y0 = static_cast<std::int64_t>(std::floor(cy - r));
    const auto y1 = static_cast<std::int64_t>(std::ceil(cy + r));
    const auto x0 = static_cast<std::int64_t>(std::floor(cx - r));
    const auto x1 = static_cast<std::int64_t>(std::ceil(cx + r));
    for (std::int64_t y = y0; y <= y1 && !reached(); ++y) {
      for (std::int64_t x = x0; x <= x1 && !reached(); ++x) {
        const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
        if (dy * dy + dx * dx <= r * r) set(y, x);
      }
    }
  }

  MaskVideo render() const {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(frames_ * height_ * width_), 0);
    for (std::int64_t t = 0; t < frames_; ++t) {
      const auto [dy, dx] = offsets_[static_cast<std::size_t>(t)];
      for (std::int64_t y = 0; y < height_; ++y) {
        for (std::int64_t x = 0; x < width_; ++x) {
          out[static_cast<std::size_t>((t * height_ + y) * width_ + x)] =
              bits_[static_cast<std::size_t>((y + pad_ - dy) * cw_ + (x + pad_ - dx))];
        }
      }
    }
    return MaskVideo(frames_, height_, width_, std::move(out));
  }

 private:
  std::int64_t frames_, height_, width_, pad_, ch_, cw_;
  std::vector<std::pair<std::int64_t, std::int64_t>> offsets_;
  std::vector<std::uint8_t> bits_;
  std::vector<std::int32_t> vis_;
  std::int64_t count_ = 0;
  std::int64_t target_ = 0;
};

using Rng = std::mt19937_64;

std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

double uniform_real(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Bounded random walk of integer translations with |step| <= motion.
std::vector<std::pair<std::int64_t, std::int64_t>> motion_path(Rng& rng, std::int64_t frames,
                                                               int motion, std::int64_t pad) {
  std::vector<std::pair<std::int64_t, std::int64_t>> path;
  std::int64_t dy = 0, dx = 0;
  for (std::int64_t t = 0; t < frames; ++t) {
    if (t > 0 && motion > 0) {
      std::int64_t sy, sx;
      do {
        sy = uniform_int(rng, -motion, motion);
        sx = uniform_int(rng, -motion, motion);
      } while (sy * sy + sx * sx > std::int64_t{motion} * motion);
      dy = std::clamp(dy + sy, -pad, pad);
      dx = std::clamp(dx + sx, -pad, pad);
    }
    path.emplace_back(dy, dx);
  }
  return path;
}

// Random-walk brush: 1-8 strokes, radius 3..min(H,W)/8, 4-12 vertices with
// turns of up to +-90 degrees, segment lengths min(H,W)/8..min(H,W)/2.
void draw_strokes(Canvas& c, Rng& rng, std::int64_t height, std::int64_t width) {
  const std::int64_t side = std::min(height, width);
  const std::int64_t max_radius = std::max<std::int64_t>(3, side / 8);
  const std::int64_t strokes = uniform_int(rng, 1, 8);
  for (std::int64_t s = 0; s < strokes && !c.reached(); ++s) {
    const auto radius = static_cast<double>(uniform_int(rng, 3, max_radius));
    double y = uniform_real(rng, static_cast<double>(c.top()), static_cast<double>(c.bottom()));
    double x = uniform_real(rng, static_cast<double>(c.left()), static_cast<double>(c.right()));
    double angle = uniform_real(rng, 0.0, 2.0 * std::numbers::pi);
    const std::int64_t vertices = uniform_int(rng, 4, 12);
    c.disc(y, x, radius);
    for (std::int64_t v = 0; v < vertices && !c.reached(); ++v) {
      angle += uniform_real(rng, -std::numbers::pi / 2, std::numbers::pi / 2);
      const double length =
          uniform_real(rng, static_cast<double>(side) / 8.0, static_cast<double>(side) / 2.0);
      for (double walked = 0.0; walked < length && !c.reached(); walked += 1.0) {
        double ny = y + std::sin(angle), nx = x + std::cos(angle);
        // Bounce off the frame region so strokes stay visible.
        if (ny < c.top() || ny > c.bottom()) {
          angle = -angle;
          ny = y + std::sin(angle);
        }
        if (nx < c.left() || nx > c.right()) {
          angle = std::numbers::pi - angle;
          nx = x + std::cos(angle);
        }
        y = std::clamp(ny, static_cast<double>(c.top()), static_cast<double>(c.bottom()));
        x = std::clamp(nx, static_cast<double>(c.left()), static_cast<double>(c.right()));
        c.disc(y, x, radius);
      }
    }
  }
}

// One rectangle grown a row or column at a time around a random center, with
// aspect ratio drawn from [1/2, 2]. The target is checked between rows and
// columns so the shape stays rectangular.
void draw_bbox(Canvas& c, Rng& rng) {
  const double aspect = std::exp(uniform_real(rng, std::log(0.5), std::log(2.0)));
  std::int64_t y0 = uniform_int(rng, c.top(), c.bottom());
  std::int64_t x0 = uniform_int(rng, c.left(), c.right());
  std::int64_t y1 = y0, x1 = x0;
  c.set(y0, x0);
  bool flip = false;
  while (!c.reached()) {
    const double h = static_cast<double>(y1 - y0 + 1), w = static_cast<double>(x1 - x0 + 1);
    const bool can_v = y0 > c.top() || y1 < c.bottom();
    const bool can_h = x0 > c.left() || x1 < c.right();
    if (!can_v && !can_h) break;
    const bool vertical = can_v && (!can_h || h / w < aspect);
    flip = !flip;
    if (vertical) {
      const bool up = (flip && y0 > c.top()) || y1 >= c.bottom();
      const std::int64_t row = up ? --y0 : ++y1;
      for (std::int64_t x = x0; x <= x1; ++x) c.set(row, x);
    } else {
      const bool left = (flip && x0 > c.left()) || x1 >= c.right();
      const std::int64_t col = left ? --x0 : ++x1;
      for (std::int64_t y = y0; y <= y1; ++y) c.set(y, col);
    }
  }
}

// 1-3 blobs, each the union of 2-5 nearby discs, dilated one pixel at a time
// in round-robin order.
void draw_objects(Canvas& c, Rng& rng, std::int64_t height, std::int64_t width) {
  struct Blob {
    std::vector<std::array<double, 3>> anchors;  // y, x, radius
    std::int64_t level = 0;
  };
  const double side = static_cast<double>(std::min(height, width));
  std::vector<Blob> blobs(static_cast<std::size_t>(uniform_int(rng, 1, 3)));
  for (auto& b : blobs) {
    const double cy = uniform_real(rng, static_cast<double>(c.top()), static_cast<double>(c.bottom()));
    const double cx = uniform_real(rng, static_cast<double>(c.left()), static_cast<double>(c.right()));
    const std::int64_t n = uniform_int(rng, 2, 5);
    for (std::int64_t k = 0; k < n; ++k) {
      b.anchors.push_back({cy + uniform_real(rng, -side / 8, side / 8),
                           cx + uniform_real(rng, -side / 8, side / 8),
                           uniform_real(rng, 1.0, std::max(2.0, side / 10))});
    }
  }
  const std::int64_t max_level = 2 * std::max(height, width);
  bool grew = true;
  while (!c.reached() && grew) {
    grew = false;
    for (auto& b : blobs) {
      if (c.reached()) break;
      if (b.level > max_level) continue;
      grew = true;
      const double s = static_cast<double>(b.level++);
      for (const auto& a : b.anchors) {
        const double r = a[2] + s;
        c.disc(a[0], a[1], r);
        if (c.reached()) break;
      }
    }
  }
}

}  // namespace

MaskVideo generate_mask(const MaskSpec& spec, std::int64_t frames, std::int64_t height,
                        std::int64_t width) {
  spec.validate();
  if (height < 16 || width < 16) {
    throw ShapeError("generate_mask: frames must be at least 16x16, got " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  if (frames < 1) throw ShapeError("generate_mask: need at least one frame");
  Rng rng(spec.seed);
  const std::int64_t pad = spec.motion > 0 ? std::min(height, width) / 4 : 0;
  Canvas canvas(frames, height, width, pad, motion_path(rng, frames, spec.motion, pad));

  const auto total = static_cast<double>(canvas.total());
  const auto lo_count = static_cast<std::int64_t>(std::ceil(spec.ratio_lo * total));
  const bool include_full = spec.ratio_hi >= 1.0;
  const auto hi_count = static_cast<std::int64_t>(std::ceil(spec.ratio_hi * total));
  auto in_range = [&](std::int64_t n) {
    return n >= lo_count && (n < hi_count || (include_full && n <= canvas.total()));
  };

  double best = -1.0;
  for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
    canvas.clear();
    const double target = uniform_real(rng, spec.ratio_lo, spec.ratio_hi);
    canvas.set_target(std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(target * total))));
    switch (spec.kind) {
      case MaskKind::stroke: draw_strokes(canvas, rng, height, width); break;
      case MaskKind::bbox: draw_bbox(canvas, rng); break;
      case MaskKind::object_like: draw_objects(canvas, rng, height, width); break;
    }
    const double achieved = static_cast<double>(canvas.count()) / total;
    const double mid = 0.5 * (spec.ratio_lo + spec.ratio_hi);
    if (best < 0 || std::abs(achieved - mid) < std::abs(best - mid)) best = achieved;
    if (in_range(canvas.count())) return canvas.render();
  }
  throw MaskGenerationError("generate_mask: ratio range [" + std::to_string(spec.ratio_lo) + "," +
                                std::to_string(spec.ratio_hi) + ") unreachable after " +
                                std::to_string(spec.max_attempts) +
                                " attempts; best ratio " + std::to_string(best),
                            best);
}

Tensor apply_mask(const Tensor& video, const Tensor& mask) {
  const Tensor keep =
      ops::add_scalar(ops::scale(ops::broadcast_channels(mask, video.dim(1)), -1.0), 1.0);
  return ops::mul(video, keep);
}

double frame_iou(const MaskVideo& mask, std::int64_t a, std::int64_t b) {
  std::int64_t inter = 0, uni = 0;
  for (std::int64_t y = 0; y < mask.height(); ++y) {
    for (std::int64_t x = 0; x < mask.width(); ++x) {
      const bool pa = mask.at(a, y, x), pb = mask.at(b, y, x);
      inter += pa && pb;
      uni += pa || pb;
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

void write_mask_frames(const std::filesystem::path& dir, const MaskVideo& mask) {
  std::filesystem::create_directories(dir);
  const std::int64_t plane = mask.height() * mask.width();
  for (std::int64_t t = 0; t < mask.frames(); ++t) {
    BitImage img{mask.width(), mask.height(),
                 std::vector<std::uint8_t>(mask.bits().begin() + static_cast<std::ptrdiff_t>(t * plane),
                                           mask.bits().begin() + static_cast<std::ptrdiff_t>((t + 1) * plane))};
    write_pbm(dir / frame_filename(t, "pbm"), img);
  }
}

MaskVideo read_mask_frames(const std::filesystem::path& dir) {
  std::vector<std::uint8_t> bits;
  std::int64_t frames = 0, height = 0, width = 0;
  while (std::filesystem::exists(dir / frame_filename(frames, "pbm"))) {
    BitImage img = read_pbm(dir / frame_filename(frames, "pbm"));
    if (frames == 0) {
      height = img.height;
      width = img.width;
    } else if (img.height != height || img.width != width) {
      throw DataError("mask frame " + std::to_string(frames) + " in " + dir.string() +
                      " has different dimensions");
    }
    bits.insert(bits.end(), img.bits.begin(), img.bits.end());
    ++frames;
  }
  if (frames == 0) throw DataError("no frame_00000.pbm in " + dir.string());
  return MaskVideo(frames, height, width, std::move(bits));
}

}  // namespace lgtsm
