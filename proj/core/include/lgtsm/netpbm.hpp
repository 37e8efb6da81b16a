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

namespace lgtsm {

// 8-bit interleaved RGB raster.
struct RgbImage {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<std::uint8_t> pixels;  // height * width * 3

  bool operator==(const RgbImage&) const = default;
};

// One byte per pixel, 1 = set (black in PBM).
struct BitImage {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<std::uint8_t> bits;

  bool operator==(const BitImage&) const = default;
};

// Binary PPM (P6, maxval 255). The writer emits "P6\n<w> <h>\n255\n" and the
// raw payload; the reader accepts any conforming header with comments.
std::vector<std::uint8_t> encode_ppm(const RgbImage& image);
RgbImage decode_ppm(const std::vector<std::uint8_t>& bytes, const std::string& what = "ppm");
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

// Binary PBM (P4): rows packed MSB-first, padded to whole bytes.
std::vector<std::uint8_t> encode_pbm(const BitImage& image);
BitImage decode_pbm(const std::vector<std::uint8_t>& bytes, const std::string& what = "pbm");
BitImage read_pbm(const std::filesystem::path& path);
void write_pbm(const std::filesystem::path& path, const BitImage& image);

// "frame_00012.ppm" style names.
std::string frame_filename(std::int64_t index, const char* extension);

}  // namespace lgtsm
