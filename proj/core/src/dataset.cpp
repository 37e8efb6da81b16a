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

#include "lgtsm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "lgtsm/errors.hpp"

namespace lgtsm {

void FrameSequence::validate() const {
  for (std::size_t t = 1; t < frames.size(); ++t) {
    if (frames[t].width != frames[0].width || frames[t].height != frames[0].height) {
      throw DataError("frame " + std::to_string(t) + " is " + std::to_string(frames[t].width) +
                      "x" + std::to_string(frames[t].height) + ", expected " +
                      std::to_string(frames[0].width) + "x" + std::to_string(frames[0].height));
    }
  }
}

FrameSequence read_frames(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("frame directory not found: " + dir.string());
  }
  FrameSequence seq;
  for (std::int64_t t = 0;; ++t) {
    const auto path = dir / frame_filename(t, "ppm");
    if (!std::filesystem::exists(path)) break;
    seq.frames.push_back(read_ppm(path));
  }
  if (seq.frames.empty()) throw DataError("no frame_00000.ppm in " + dir.string());
  if (std::filesystem::exists(dir / "fps")) {
    std::ifstream in(dir / "fps");
    double fps = 0.0;
    if (in >> fps) seq.fps = fps;
  }
  seq.validate();
  return seq;
}

void write_frames(const std::filesystem::path& dir, const FrameSequence& seq) {
  seq.validate();
  std::filesystem::create_directories(dir);
  for (std::int64_t t = 0; t < seq.length(); ++t) {
    write_ppm(dir / frame_filename(t, "ppm"), seq.frames[static_cast<std::size_t>(t)]);
  }
  if (seq.fps) {
    std::ofstream out(dir / "fps");
    out << *seq.fps << "\n";
  }
}

double normalize_value(std::uint8_t v) { return static_cast<double>(v) / 127.5 - 1.0; }

std::uint8_t denormalize_value(double x) {
  const double v = std::clamp((x + 1.0) * 127.5, 0.0, 255.0);
  return static_cast<std::uint8_t>(std::floor(v + 0.5));
}

Tensor normalize(const FrameSequence& seq, DType dtype) {
  seq.validate();
  const std::int64_t L = seq.length(), H = seq.height(), W = seq.width();
  Tensor out = Tensor::zeros({1, 3, L, H, W}, dtype);
  dispatch(dtype, [&](auto tag) {
    using T = decltype(tag);
    auto d = out.data<T>();
    for (std::int64_t t = 0; t < L; ++t) {
      const auto& px = seq.frames[static_cast<std::size_t>(t)].pixels;
      for (std::int64_t i = 0; i < H * W; ++i) {
        for (std::int64_t c = 0; c < 3; ++c) {
          d[static_cast<std::size_t>((c * L + t) * H * W + i)] =
              static_cast<T>(normalize_value(px[static_cast<std::size_t>(i * 3 + c)]));
        }
      }
    }
  });
  return out;
}

FrameSequence denormalize(const Tensor& video, std::int64_t b) {
  if (video.rank() != 5 || video.dim(1) != 3) {
    throw ShapeError("denormalize expects [B,3,L,H,W], got " + shape_str(video.shape()));
  }
  const std::int64_t L = video.dim(2), H = video.dim(3), W = video.dim(4);
  FrameSequence seq;
  for (std::int64_t t = 0; t < L; ++t) {
    RgbImage img{W, H, std::vector<std::uint8_t>(static_cast<std::size_t>(H * W * 3))};
    for (std::int64_t i = 0; i < H * W; ++i) {
      for (std::int64_t c = 0; c < 3; ++c) {
        img.pixels[static_cast<std::size_t>(i * 3 + c)] =
            denormalize_value(video.at(((b * 3 + c) * L + t) * H * W + i));
      }
    }
    seq.frames.push_back(std::move(img));
  }
  return seq;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

// Allowed range of the reference coordinate along one axis.
std::pair<std::int64_t, std::int64_t> axis_range(const SceneShape& s, std::int64_t extent,
                                                 bool vertical) {
  if (s.kind == ShapeKind::disk) return {s.h, extent - 1 - s.h};
  return {0, extent - (vertical ? s.h : s.w)};
}

void advance(std::int64_t& p, std::int64_t& v, std::int64_t lo, std::int64_t hi) {
  p += v;
  if (hi <= lo) {
    p = lo;
    return;
  }
  while (p < lo || p > hi) {
    if (p < lo) p = 2 * lo - p;
    if (p > hi) p = 2 * hi - p;
    v = -v;
  }
}

}  // namespace

void SyntheticSceneSpec::validate() const {
  if (length < 1 || height < 1 || width < 1) throw ShapeError("scene dimensions must be positive");
  for (const auto& s : shapes) {
    if (s.h < 1 || s.w < 1) throw ShapeError("scene shape extent must be positive");
    if (std::abs(s.vy) > 4 || std::abs(s.vx) > 4) {
      throw ShapeError("scene shape speed must be at most 4 px/frame");
    }
    const auto [ylo, yhi] = axis_range(s, height, true);
    const auto [xlo, xhi] = axis_range(s, width, false);
    if (yhi < ylo || xhi < xlo) throw ShapeError("scene shape does not fit in the frame");
    if (s.y < ylo || s.y > yhi || s.x < xlo || s.x > xhi) {
      throw ShapeError("scene shape starts outside the frame");
    }
  }
}

SyntheticSceneSpec SyntheticSceneSpec::random(std::uint64_t seed, std::int64_t length,
                                              std::int64_t height, std::int64_t width) {
  std::mt19937_64 rng(seed);
  auto uni = [&](std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
  };
  auto color = [&](std::uint8_t* c) {
    for (int k = 0; k < 3; ++k) c[k] = static_cast<std::uint8_t>(uni(0, 255));
  };
  SyntheticSceneSpec spec;
  spec.seed = seed;
  spec.length = length;
  spec.height = height;
  spec.width = width;
  spec.background = uni(0, 1) ? Background::gradient : Background::constant;
  color(spec.bg_a);
  color(spec.bg_b);
  const std::int64_t side = std::min(height, width);
  const std::int64_t n = uni(1, 4);
  for (std::int64_t i = 0; i < n; ++i) {
    SceneShape s;
    s.kind = uni(0, 1) ? ShapeKind::disk : ShapeKind::rect;
    if (s.kind == ShapeKind::disk) {
      s.h = s.w = uni(std::max<std::int64_t>(1, side / 16), std::max<std::int64_t>(1, side / 5));
    } else {
      s.h = uni(std::max<std::int64_t>(1, side / 8), std::max<std::int64_t>(1, side / 2));
      s.w = uni(std::max<std::int64_t>(1, side / 8), std::max<std::int64_t>(1, side / 2));
    }
    const auto [ylo, yhi] = axis_range(s, height, true);
    const auto [xlo, xhi] = axis_range(s, width, false);
    s.y = uni(ylo, std::max(ylo, yhi));
    s.x = uni(xlo, std::max(xlo, xhi));
    s.vy = uni(-4, 4);
    s.vx = uni(-4, 4);
    color(s.color);
    spec.shapes.push_back(s);
  }
  return spec;
}

FrameSequence synth_video(const SyntheticSceneSpec& spec) {
  spec.validate();
  const std::int64_t H = spec.height, W = spec.width;
  RgbImage background{W, H, std::vector<std::uint8_t>(static_cast<std::size_t>(H * W * 3))};
  for (std::int64_t y = 0; y < H; ++y) {
    for (std::int64_t x = 0; x < W; ++x) {
      const double a = spec.background == Background::gradient && W > 1
                           ? static_cast<double>(x) / static_cast<double>(W - 1)
                           : 0.0;
      for (int c = 0; c < 3; ++c) {
        const double v = (1.0 - a) * spec.bg_a[c] + a * spec.bg_b[c];
        background.pixels[static_cast<std::size_t>((y * W + x) * 3 + c)] =
            static_cast<std::uint8_t>(std::floor(v + 0.5));
      }
    }
  }

  std::vector<SceneShape> shapes = spec.shapes;
  FrameSequence seq;
  for (std::int64_t t = 0; t < spec.length; ++t) {
    if (t > 0) {
      for (auto& s : shapes) {
        const auto [ylo, yhi] = axis_range(s, H, true);
        const auto [xlo, xhi] = axis_range(s, W, false);
        advance(s.y, s.vy, ylo, yhi);
        advance(s.x, s.vx, xlo, xhi);
      }
    }
    RgbImage frame = background;
    for (const auto& s : shapes) {
      const bool disk = s.kind == ShapeKind::disk;
      const std::int64_t y0 = disk ? s.y - s.h : s.y, y1 = disk ? s.y + s.h : s.y + s.h - 1;
      const std::int64_t x0 = disk ? s.x - s.h : s.x, x1 = disk ? s.x + s.h : s.x + s.w - 1;
      for (std::int64_t y = std::max<std::int64_t>(y0, 0); y <= std::min(y1, H - 1); ++y) {
        for (std::int64_t x = std::max<std::int64_t>(x0, 0); x <= std::min(x1, W - 1); ++x) {
          if (disk && (y - s.y) * (y - s.y) + (x - s.x) * (x - s.x) > s.h * s.h) continue;
          for (int c = 0; c < 3; ++c) {
            frame.pixels[static_cast<std::size_t>((y * W + x) * 3 + c)] = s.color[c];
          }
        }
      }
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

Dataset::Dataset(std::vector<FrameSequence> clips) : clips_(std::move(clips)) {
  for (std::size_t i = 0; i < clips_.size(); ++i) {
    clips_[i].validate();
    if (clips_[i].length() != clips_[0].length() || clips_[i].height() != clips_[0].height() ||
        clips_[i].width() != clips_[0].width()) {
      throw DataError("clip " + std::to_string(i) + " differs in size from clip 0");
    }
  }
}

Dataset Dataset::synthetic(std::size_t n, std::uint64_t seed, std::int64_t length,
                           std::int64_t height, std::int64_t width) {
  std::vector<FrameSequence> clips;
  clips.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    clips.push_back(synth_video(SyntheticSceneSpec::random(mix_seed(seed, i), length, height, width)));
  }
  return Dataset(std::move(clips));
}

Dataset Dataset::from_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open manifest " + manifest.string());
  std::vector<FrameSequence> clips;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    std::filesystem::path dir = line.substr(first, last - first + 1);
    if (dir.is_relative()) dir = manifest.parent_path() / dir;
    clips.push_back(read_frames(dir));
  }
  if (clips.empty()) throw DataError("manifest " + manifest.string() + " lists no clips");
  return Dataset(std::move(clips));
}

std::int64_t Dataset::length() const { return clips_.empty() ? 0 : clips_[0].length(); }
std::int64_t Dataset::height() const { return clips_.empty() ? 0 : clips_[0].height(); }
std::int64_t Dataset::width() const { return clips_.empty() ? 0 : clips_[0].width(); }

void Batch::check_consistent() const {
  const Tensor expected = apply_mask(video, mask);
  if (expected.shape() != masked_video.shape() ||
      expected.to_vector() != masked_video.to_vector()) {
    throw ShapeError("batch masked_video is inconsistent with video and mask");
  }
}

BatchSampler::BatchSampler(std::size_t dataset_size, std::int64_t batch_size, std::uint64_t seed,
                           bool shuffle)
    : n_(dataset_size), batch_size_(batch_size), seed_(seed), shuffle_(shuffle) {
  if (n_ == 0) throw DataError("cannot sample from an empty dataset");
  if (batch_size_ < 1) throw ShapeError("batch size must be positive");
}

std::vector<std::size_t> BatchSampler::indices(std::uint64_t step) const {
  std::vector<std::size_t> out;
  std::uint64_t cached_epoch = ~std::uint64_t{0};
  std::vector<std::size_t> perm(n_);
  for (std::int64_t i = 0; i < batch_size_; ++i) {
    const std::uint64_t k = step * static_cast<std::uint64_t>(batch_size_) + static_cast<std::uint64_t>(i);
    const std::uint64_t epoch = k / n_;
    if (!shuffle_) {
      out.push_back(static_cast<std::size_t>(k % n_));
      continue;
    }
    if (epoch != cached_epoch) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::mt19937_64 rng(mix_seed(seed_, epoch));
      // Fisher-Yates with an explicit draw so the order does not depend on
      // the standard library's shuffle.
      for (std::size_t j = n_ - 1; j > 0; --j) {
        std::swap(perm[j], perm[static_cast<std::size_t>(rng() % (j + 1))]);
      }
      cached_epoch = epoch;
    }
    out.push_back(perm[static_cast<std::size_t>(k % n_)]);
  }
  return out;
}

namespace {

Batch assemble(const std::vector<const FrameSequence*>& clips, std::vector<MaskVideo> masks,
               DType dtype) {
  if (clips.empty()) throw ShapeError("make_batch needs at least one clip");
  const std::int64_t B = static_cast<std::int64_t>(clips.size());
  const std::int64_t L = clips[0]->length(), H = clips[0]->height(), W = clips[0]->width();
  const std::int64_t per_video = 3 * L * H * W, per_mask = L * H * W;
  Batch batch;
  batch.video = Tensor::zeros({B, 3, L, H, W}, dtype);
  batch.mask = Tensor::zeros({B, 1, L, H, W}, dtype);
  dispatch(dtype, [&](auto tag) {
    using T = decltype(tag);
    auto v = batch.video.data<T>();
    auto m = batch.mask.data<T>();
    for (std::int64_t b = 0; b < B; ++b) {
      const auto& clip = *clips[static_cast<std::size_t>(b)];
      if (clip.length() != L || clip.height() != H || clip.width() != W) {
        throw DataError("make_batch: clip " + std::to_string(b) + " differs in size");
      }
      const Tensor one = normalize(clip, dtype);
      std::copy(one.data<T>().begin(), one.data<T>().end(),
                v.begin() + static_cast<std::ptrdiff_t>(b * per_video));
      const auto& bits = masks[static_cast<std::size_t>(b)].bits();
      for (std::int64_t i = 0; i < per_mask; ++i) {
        m[static_cast<std::size_t>(b * per_mask + i)] = static_cast<T>(bits[static_cast<std::size_t>(i)]);
      }
    }
  });
  batch.masked_video = apply_mask(batch.video, batch.mask);
  batch.masks = std::move(masks);
  return batch;
}

}  // namespace

Batch make_batch(const std::vector<const FrameSequence*>& clips, const MaskSpec& mask_spec,
                 DType dtype) {
  std::vector<MaskVideo> masks;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    MaskSpec spec = mask_spec;
    spec.seed = mix_seed(mask_spec.seed, i);
    masks.push_back(generate_mask(spec, clips[i]->length(), clips[i]->height(), clips[i]->width()));
  }
  Batch batch = assemble(clips, std::move(masks), dtype);
  for (std::size_t i = 0; i < clips.size(); ++i) batch.indices.push_back(i);
  return batch;
}

Batch make_batch(const Dataset& data, const BatchSampler& sampler, const MaskSpec& mask_spec,
                 std::uint64_t step, DType dtype) {
  const auto idx = sampler.indices(step);
  std::vector<const FrameSequence*> clips;
  std::vector<MaskVideo> masks;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const FrameSequence& clip = data.at(idx[i]);
    clips.push_back(&clip);
    MaskSpec spec = mask_spec;
    spec.seed = mix_seed(mix_seed(mask_spec.seed, step), i);
    masks.push_back(generate_mask(spec, clip.length(), clip.height(), clip.width()));
  }
  Batch batch = assemble(clips, std::move(masks), dtype);
  batch.indices = idx;
  return batch;
}

}  // namespace lgtsm
