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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "lgtsm/dataset.hpp"
#include "lgtsm/errors.hpp"
#include "lgtsm/netpbm.hpp"
#include "test_support.hpp"

using namespace lgtsm;
using lgtsm::testing::TempDir;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

RgbImage random_image(std::int64_t w, std::int64_t h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RgbImage img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w * h * 3))};
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xFF);
  return img;
}

FrameSequence random_clip(std::int64_t L, std::int64_t h, std::int64_t w, std::uint64_t seed) {
  FrameSequence seq;
  for (std::int64_t t = 0; t < L; ++t) seq.frames.push_back(random_image(w, h, seed * 131 + t));
  return seq;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("ppm writer emits the minimal header and raw payload") {
  const RgbImage white{1, 1, {255, 255, 255}};
  CHECK(encode_ppm(white) == bytes_of(std::string("P6\n1 1\n255\n\xFF\xFF\xFF", 14)));
}

TEST_CASE("ppm round trip is byte exact") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const RgbImage img = random_image(7 + static_cast<std::int64_t>(seed), 5, seed);
    const auto bytes = encode_ppm(img);
    CHECK(decode_ppm(bytes) == img);
    CHECK(encode_ppm(decode_ppm(bytes)) == bytes);
  }
  TempDir dir("ppm");
  const RgbImage img = random_image(13, 9, 42);
  write_ppm(dir.path() / "a.ppm", img);
  CHECK(read_ppm(dir.path() / "a.ppm") == img);
}

TEST_CASE("ppm reader accepts comments and arbitrary whitespace") {
  auto bytes = bytes_of("P6 # comment\n2\t1 # more\n255\n");
  for (std::uint8_t v = 1; v <= 6; ++v) bytes.push_back(v);
  const RgbImage img = decode_ppm(bytes);
  CHECK(img.width == 2);
  CHECK(img.height == 1);
  CHECK(img.pixels == std::vector<std::uint8_t>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("ppm reader rejects malformed input") {
  auto truncated = bytes_of(std::string("P6\n2 2\n255\n", 11));
  truncated.resize(truncated.size() + 5, 7);
  CHECK_THROWS_AS(decode_ppm(truncated), DataError);
  const std::string msg = error_of([&] { decode_ppm(truncated); });
  CHECK(msg.find("expected 12") != std::string::npos);
  CHECK(msg.find("got 5") != std::string::npos);

  CHECK(error_of([] { decode_ppm(bytes_of("P5\n1 1\n255\n\x01")); }).find("not a") !=
        std::string::npos);
  CHECK(error_of([] { decode_ppm(bytes_of("P6\n1 1\n65535\n\x01\x02\x03\x04\x05\x06")); })
            .find("only maxval 255") != std::string::npos);
  CHECK_THROWS_AS(decode_ppm(bytes_of("P6\n1")), DataError);
  CHECK_THROWS_AS(read_ppm("/nonexistent/lgtsm/x.ppm"), DataError);
  CHECK_THROWS_AS(encode_ppm(RgbImage{2, 2, std::vector<std::uint8_t>(11)}), ShapeError);
}

TEST_CASE("pbm packs rows most significant bit first with byte padding") {
  // 10 pixels per row: two bytes per row, the last six bits are padding.
  BitImage img{10, 2, std::vector<std::uint8_t>(20, 0)};
  img.bits[0] = 1;
  img.bits[9] = 1;
  img.bits[10 + 1] = 1;
  const auto bytes = encode_pbm(img);
  const std::string header = "P4\n10 2\n";
  REQUIRE(bytes.size() == header.size() + 4);
  CHECK(std::equal(header.begin(), header.end(), bytes.begin()));
  CHECK(bytes[header.size() + 0] == 0x80);
  CHECK(bytes[header.size() + 1] == 0x40);
  CHECK(bytes[header.size() + 2] == 0x40);
  CHECK(bytes[header.size() + 3] == 0x00);
  CHECK(decode_pbm(bytes) == img);
}

TEST_CASE("pbm round trip on random masks") {
  std::mt19937_64 rng(9);
  TempDir dir("pbm");
  for (std::int64_t w : {1, 7, 8, 9, 17}) {
    BitImage img{w, 5, std::vector<std::uint8_t>(static_cast<std::size_t>(w * 5))};
    for (auto& b : img.bits) b = static_cast<std::uint8_t>(rng() & 1);
    const auto bytes = encode_pbm(img);
    CHECK(decode_pbm(bytes) == img);
    CHECK(encode_pbm(decode_pbm(bytes)) == bytes);
    write_pbm(dir.path() / "m.pbm", img);
    CHECK(read_pbm(dir.path() / "m.pbm") == img);
  }
  CHECK_THROWS_AS(decode_pbm(bytes_of("P4\n9 2\n\x01\x02")), DataError);
}

TEST_CASE("frame filenames are zero padded to five digits") {
  CHECK(frame_filename(0, "ppm") == "frame_00000.ppm");
  CHECK(frame_filename(12, "pbm") == "frame_00012.pbm");
}

TEST_CASE("pixel normalization maps 0..255 onto [-1,1]") {
  CHECK(normalize_value(0) == -1.0);
  CHECK(normalize_value(255) == 1.0);
  CHECK(normalize_value(128) == doctest::Approx(0.5 / 127.5).epsilon(1e-12));
  for (int v = 0; v < 256; ++v) {
    CHECK(denormalize_value(normalize_value(static_cast<std::uint8_t>(v))) == v);
  }
  CHECK(denormalize_value(-3.0) == 0);
  CHECK(denormalize_value(3.0) == 255);
  // 0 maps back to 127.5 exactly; half rounds up.
  CHECK(denormalize_value(0.0) == 128);
  CHECK(denormalize_value(-1e-9) == 127);
}

TEST_CASE("normalize lays frames out as [1,3,L,H,W]") {
  const FrameSequence seq = random_clip(3, 4, 5, 1);
  for (DType dtype : {DType::f32, DType::f64}) {
    const Tensor v = normalize(seq, dtype);
    REQUIRE(v.shape() == Shape{1, 3, 3, 4, 5});
    for (std::int64_t t = 0; t < 3; ++t) {
      for (std::int64_t y = 0; y < 4; ++y) {
        for (std::int64_t x = 0; x < 5; ++x) {
          for (std::int64_t c = 0; c < 3; ++c) {
            const auto raw = seq.frames[static_cast<std::size_t>(t)]
                                 .pixels[static_cast<std::size_t>((y * 5 + x) * 3 + c)];
            const double expected = raw / 127.5 - 1.0;
            const double got = v.at(lgtsm::testing::idx5(v.shape(), 0, c, t, y, x));
            CHECK(got == doctest::Approx(expected).epsilon(1e-6));
          }
        }
      }
    }
    CHECK(denormalize(v) == seq);
  }
  CHECK_THROWS_AS(denormalize(Tensor::zeros({1, 2, 1, 2, 2})), ShapeError);
}

TEST_CASE("frame directories round trip with fps") {
  TempDir dir("frames");
  FrameSequence seq = random_clip(4, 6, 8, 3);
  seq.fps = 24.0;
  write_frames(dir.path() / "clip", seq);
  CHECK(std::filesystem::exists(dir.path() / "clip" / "frame_00003.ppm"));
  const FrameSequence back = read_frames(dir.path() / "clip");
  CHECK(back == seq);
  REQUIRE(back.fps.has_value());
  CHECK(*back.fps == 24.0);

  FrameSequence plain = random_clip(2, 3, 3, 4);
  write_frames(dir.path() / "plain", plain);
  CHECK_FALSE(read_frames(dir.path() / "plain").fps.has_value());

  // Reading stops at the first gap in the numbering.
  std::filesystem::remove(dir.path() / "clip" / "frame_00002.ppm");
  CHECK(read_frames(dir.path() / "clip").length() == 2);
}

TEST_CASE("frame directory errors") {
  TempDir dir("frames_err");
  CHECK(error_of([&] { read_frames(dir.path() / "missing"); }).find("frame directory not found") !=
        std::string::npos);
  std::filesystem::create_directories(dir.path() / "empty");
  CHECK(error_of([&] { read_frames(dir.path() / "empty"); }).find("no frame_00000.ppm") !=
        std::string::npos);
  std::filesystem::create_directories(dir.path() / "mixed");
  write_ppm(dir.path() / "mixed" / "frame_00000.ppm", random_image(4, 4, 1));
  write_ppm(dir.path() / "mixed" / "frame_00001.ppm", random_image(5, 4, 2));
  CHECK_THROWS_AS(read_frames(dir.path() / "mixed"), DataError);
}

TEST_CASE("synthetic scene with zero velocity is static") {
  SyntheticSceneSpec spec;
  spec.length = 5;
  spec.height = spec.width = 32;
  spec.bg_a[0] = 10;
  SceneShape s;
  s.y = 4;
  s.x = 6;
  spec.shapes.push_back(s);
  const FrameSequence seq = synth_video(spec);
  REQUIRE(seq.length() == 5);
  for (const auto& f : seq.frames) CHECK(f == seq.frames.front());
}

TEST_CASE("synthetic rectangles translate by their velocity") {
  for (int axis = 0; axis < 2; ++axis) {
    SyntheticSceneSpec spec;
    spec.length = 8;
    spec.height = spec.width = 64;
    spec.bg_a[0] = spec.bg_a[1] = spec.bg_a[2] = 40;
    SceneShape s;
    s.y = 20;
    s.x = 10;
    s.h = s.w = 8;
    (axis == 0 ? s.vx : s.vy) = 1;
    s.color[0] = 200;
    s.color[1] = 100;
    s.color[2] = 50;
    spec.shapes.push_back(s);
    const FrameSequence seq = synth_video(spec);
    for (std::int64_t t = 0; t < 8; ++t) {
      const std::int64_t y0 = 20 + (axis == 1 ? t : 0), x0 = 10 + (axis == 0 ? t : 0);
      const auto& px = seq.frames[static_cast<std::size_t>(t)].pixels;
      std::int64_t wrong = 0;
      for (std::int64_t y = 0; y < 64; ++y) {
        for (std::int64_t x = 0; x < 64; ++x) {
          const bool inside = y >= y0 && y < y0 + 8 && x >= x0 && x < x0 + 8;
          const std::uint8_t expected = inside ? 200 : 40;
          if (px[static_cast<std::size_t>((y * 64 + x) * 3)] != expected) ++wrong;
        }
      }
      CHECK(wrong == 0);
    }
  }
}

TEST_CASE("synthetic shapes reflect at the border") {
  SyntheticSceneSpec spec;
  spec.length = 4;
  spec.height = 16;
  spec.width = 12;
  SceneShape s;
  s.h = s.w = 4;
  s.y = 0;
  s.x = 7;  // allowed x range [0, 8]
  s.vx = 2;
  spec.shapes.push_back(s);
  const FrameSequence seq = synth_video(spec);
  // x positions: 7, 9 -> 7, 5, 3
  const std::int64_t expected_left[] = {7, 7, 5, 3};
  for (std::int64_t t = 0; t < 4; ++t) {
    const auto& px = seq.frames[static_cast<std::size_t>(t)].pixels;
    std::int64_t left = -1;
    for (std::int64_t x = 0; x < 12; ++x) {
      if (px[static_cast<std::size_t>(x * 3)] == 255) {
        left = x;
        break;
      }
    }
    CHECK(left == expected_left[t]);
  }
}

TEST_CASE("synthetic scenes are deterministic in the seed") {
  const auto a = synth_video(SyntheticSceneSpec::random(5, 6, 32, 32));
  const auto b = synth_video(SyntheticSceneSpec::random(5, 6, 32, 32));
  const auto c = synth_video(SyntheticSceneSpec::random(6, 6, 32, 32));
  CHECK(a == b);
  CHECK_FALSE(a == c);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CHECK_NOTHROW(SyntheticSceneSpec::random(seed, 4, 16, 24).validate());
  }
}

TEST_CASE("scene validation rejects impossible shapes") {
  SyntheticSceneSpec spec;
  spec.height = spec.width = 16;
  SceneShape s;
  s.vx = 5;
  spec.shapes = {s};
  CHECK_THROWS_AS(spec.validate(), ShapeError);
  s.vx = 0;
  s.w = 17;
  spec.shapes = {s};
  CHECK_THROWS_AS(spec.validate(), ShapeError);
  s.w = 8;
  s.x = 9;
  spec.shapes = {s};
  CHECK_THROWS_AS(spec.validate(), ShapeError);
  s.x = 0;
  s.h = 0;
  spec.shapes = {s};
  CHECK_THROWS_AS(spec.validate(), ShapeError);
  spec.shapes.clear();
  spec.length = 0;
  CHECK_THROWS_AS(synth_video(spec), ShapeError);
}

TEST_CASE("manifest datasets resolve relative paths and skip comments") {
  TempDir dir("manifest");
  const FrameSequence a = random_clip(3, 8, 8, 11), b = random_clip(3, 8, 8, 12);
  write_frames(dir.path() / "clips" / "a", a);
  write_frames(dir.path() / "clips" / "b", b);
  {
    std::ofstream out(dir.path() / "list.txt");
    out << "# training clips\n\nclips/a\n   \n" << (dir.path() / "clips" / "b").string()
        << "  \n";
  }
  const Dataset ds = Dataset::from_manifest(dir.path() / "list.txt");
  REQUIRE(ds.size() == 2);
  CHECK(ds.at(0) == a);
  CHECK(ds.at(1) == b);
  CHECK(ds.length() == 3);
  CHECK(ds.height() == 8);

  CHECK(error_of([&] { Dataset::from_manifest(dir.path() / "none.txt"); })
            .find("cannot open manifest") != std::string::npos);
  {
    std::ofstream out(dir.path() / "empty.txt");
    out << "# nothing\n";
  }
  CHECK(error_of([&] { Dataset::from_manifest(dir.path() / "empty.txt"); }).find("lists no clips") !=
        std::string::npos);
  write_frames(dir.path() / "clips" / "c", random_clip(4, 8, 8, 13));
  {
    std::ofstream out(dir.path() / "mixed.txt");
    out << "clips/a\nclips/c\n";
  }
  CHECK_THROWS_AS(Dataset::from_manifest(dir.path() / "mixed.txt"), DataError);
}

TEST_CASE("synthetic datasets are deterministic") {
  const Dataset a = Dataset::synthetic(4, 7, 3, 16, 16);
  const Dataset b = Dataset::synthetic(4, 7, 3, 16, 16);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(a.at(i) == b.at(i));
  CHECK_FALSE(a.at(0) == a.at(1));
}

TEST_CASE("batch sampler visits every clip once per epoch") {
  const std::size_t n = 7;
  const BatchSampler sampler(n, 3, 5);
  std::vector<std::size_t> stream;
  for (std::uint64_t s = 0; s < 7; ++s) {
    const auto idx = sampler.indices(s);
    CHECK(idx.size() == 3);
    stream.insert(stream.end(), idx.begin(), idx.end());
  }
  for (std::size_t e = 0; e < 3; ++e) {
    std::set<std::size_t> seen(stream.begin() + static_cast<std::ptrdiff_t>(e * n),
                               stream.begin() + static_cast<std::ptrdiff_t>((e + 1) * n));
    CHECK(seen.size() == n);
  }
  CHECK(BatchSampler(n, 3, 5).indices(4) == sampler.indices(4));
  bool differs = false;
  for (std::uint64_t s = 0; s < 7; ++s) differs |= BatchSampler(n, 3, 6).indices(s) != sampler.indices(s);
  CHECK(differs);

  const BatchSampler ordered(n, 3, 5, false);
  CHECK(ordered.indices(2) == std::vector<std::size_t>{6, 0, 1});
  CHECK_THROWS_AS(BatchSampler(0, 1, 0), DataError);
  CHECK_THROWS_AS(BatchSampler(3, 0, 0), ShapeError);
}

TEST_CASE("batches zero the masked pixels and stay consistent") {
  const Dataset ds = Dataset::synthetic(3, 2, 4, 32, 32);
  MaskSpec spec;
  spec.seed = 17;
  const Batch one = make_batch({&ds.at(1)}, spec, DType::f64);
  REQUIRE(one.size() == 1);
  CHECK(one.video.to_vector() == normalize(ds.at(1), DType::f64).to_vector());

  const BatchSampler sampler(ds.size(), 2, 3);
  const Batch batch = make_batch(ds, sampler, spec, 5, DType::f64);
  REQUIRE(batch.size() == 2);
  CHECK(batch.indices == sampler.indices(5));
  const Shape& vs = batch.video.shape();
  std::int64_t masked = 0;
  for (std::int64_t b = 0; b < 2; ++b) {
    for (std::int64_t t = 0; t < 4; ++t) {
      for (std::int64_t y = 0; y < 32; ++y) {
        for (std::int64_t x = 0; x < 32; ++x) {
          const double m = batch.mask.at(((b * 4 + t) * 32 + y) * 32 + x);
          CHECK((m == 0.0 || m == 1.0));
          CHECK(m == batch.masks[static_cast<std::size_t>(b)].at(t, y, x));
          masked += m == 1.0;
          for (std::int64_t c = 0; c < 3; ++c) {
            const auto i = lgtsm::testing::idx5(vs, b, c, t, y, x);
            const double expected = m == 1.0 ? 0.0 : batch.video.at(i);
            if (batch.masked_video.at(i) != expected) FAIL("masked pixel mismatch");
          }
        }
      }
    }
  }
  CHECK(masked > 0);
  CHECK_NOTHROW(batch.check_consistent());

  const Batch again = make_batch(ds, sampler, spec, 5, DType::f64);
  CHECK(again.mask.to_vector() == batch.mask.to_vector());
  const Batch other = make_batch(ds, sampler, spec, 6, DType::f64);
  CHECK(other.mask.to_vector() != batch.mask.to_vector());

  Batch broken = batch;
  broken.masked_video = batch.video.clone();
  CHECK_THROWS_AS(broken.check_consistent(), ShapeError);
  CHECK_THROWS_AS(make_batch(std::vector<const FrameSequence*>{}, spec), ShapeError);
}
