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

#include "lgtsm/netpbm.hpp"

#include <cctype>
#include <cstdio>

#include "binary_io.hpp"
#include "lgtsm/errors.hpp"

namespace lgtsm {

namespace {

struct HeaderParser {
  const std::vector<std::uint8_t>& bytes;
  const std::string& what;
  std::size_t pos = 0;

  void skip_space_and_comments() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  }

  std::int64_t number(const char* field) {
    skip_space_and_comments();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
      throw DataError(what + ": missing " + field + " in header");
    }
    std::int64_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > (std::int64_t{1} << 30)) throw DataError(what + ": " + field + " too large");
      ++pos;
    }
    return v;
  }

  void magic(const char* expected) {
    if (bytes.size() < 2 || bytes[0] != expected[0] || bytes[1] != expected[1]) {
      throw DataError(what + ": not a " + expected + " file");
    }
    pos = 2;
  }

  // Exactly one whitespace byte separates the header from the payload.
  void end_of_header() {
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
      throw DataError(what + ": malformed header terminator");
    }
    ++pos;
  }
};

void check_payload(const std::string& what, std::size_t expected, std::size_t actual) {
  if (actual < expected) {
    throw DataError(what + ": truncated payload, expected " + std::to_string(expected) +
                    " bytes, got " + std::to_string(actual));
  }
}

}  // namespace

std::string frame_filename(std::int64_t index, const char* extension) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "frame_%05lld.%s", static_cast<long long>(index), extension);
  return buf;
}

std::vector<std::uint8_t> encode_ppm(const RgbImage& image) {
  if (image.pixels.size() != static_cast<std::size_t>(image.width * image.height * 3)) {
    throw ShapeError("encode_ppm: pixel buffer does not match " + std::to_string(image.width) +
                     "x" + std::to_string(image.height));
  }
  const std::string header =
      "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

RgbImage decode_ppm(const std::vector<std::uint8_t>& bytes, const std::string& what) {
  HeaderParser p{bytes, what};
  p.magic("P6");
  RgbImage img;
  img.width = p.number("width");
  img.height = p.number("height");
  const std::int64_t maxval = p.number("maxval");
  if (maxval != 255) {
    throw DataError(what + ": only maxval 255 is supported, got " + std::to_string(maxval));
  }
  p.end_of_header();
  const auto expected = static_cast<std::size_t>(img.width * img.height * 3);
  check_payload(what, expected, bytes.size() - p.pos);
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(p.pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(p.pos + expected));
  return img;
}

RgbImage read_ppm(const std::filesystem::path& path) {
  return decode_ppm(detail::read_file(path.string()), path.string());
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  detail::write_file(path.string(), encode_ppm(image));
}

std::vector<std::uint8_t> encode_pbm(const BitImage& image) {
  if (image.bits.size() != static_cast<std::size_t>(image.width * image.height)) {
    throw ShapeError("encode_pbm: bit buffer does not match " + std::to_string(image.width) +
                     "x" + std::to_string(image.height));
  }
  const std::string header =
      "P4\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const std::int64_t row_bytes = (image.width + 7) / 8;
  for (std::int64_t y = 0; y < image.height; ++y) {
    for (std::int64_t b = 0; b < row_bytes; ++b) {
      std::uint8_t byte = 0;
      for (int bit = 0; bit < 8; ++bit) {
        const std::int64_t x = b * 8 + bit;
        if (x < image.width && image.bits[static_cast<std::size_t>(y * image.width + x)]) {
          byte |= static_cast<std::uint8_t>(0x80 >> bit);
        }
      }
      out.push_back(byte);
    }
  }
  return out;
}

BitImage decode_pbm(const std::vector<std::uint8_t>& bytes, const std::string& what) {
  HeaderParser p{bytes, what};
  p.magic("P4");
  BitImage img;
  img.width = p.number("width");
  img.height = p.number("height");
  p.end_of_header();
  const std::int64_t row_bytes = (img.width + 7) / 8;
  check_payload(what, static_cast<std::size_t>(row_bytes * img.height), bytes.size() - p.pos);
  img.bits.resize(static_cast<std::size_t>(img.width * img.height));
  for (std::int64_t y = 0; y < img.height; ++y) {
    for (std::int64_t x = 0; x < img.width; ++x) {
      const std::uint8_t byte = bytes[p.pos + static_cast<std::size_t>(y * row_bytes + x / 8)];
      img.bits[static_cast<std::size_t>(y * img.width + x)] = (byte >> (7 - x % 8)) & 1;
    }
  }
  return img;
}

BitImage read_pbm(const std::filesystem::path& path) {
  return decode_pbm(detail::read_file(path.string()), path.string());
}

void write_pbm(const std::filesystem::path& path, const BitImage& image) {
  detail::write_file(path.string(), encode_pbm(image));
}

}  // namespace lgtsm
