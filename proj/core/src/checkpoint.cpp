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

#include "lgtsm/checkpoint.hpp"

#include <zlib.h>

#include "binary_io.hpp"
#include "lgtsm/errors.hpp"

namespace lgtsm {

namespace {

constexpr char kMagic[] = "LGTSMCK1";
constexpr std::size_t kMagicSize = 8;

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in pieces.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

Tensor Checkpoint::find(const std::string& name) const {
  for (const auto& p : tensors) {
    if (p.name == name) return p.tensor;
  }
  return {};
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  check_unique_names(ckpt.tensors);
  detail::ByteWriter w;
  w.str(std::string_view(kMagic, kMagicSize));
  w.uint<std::uint8_t>(kCheckpointVersion);
  w.uint<std::uint8_t>(static_cast<std::uint8_t>(ckpt.stage));
  w.uint<std::uint64_t>(ckpt.step);
  w.uint<std::uint64_t>(ckpt.adam_g_steps);
  w.uint<std::uint64_t>(ckpt.adam_d_steps);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(ckpt.rng_state.size()));
  w.str(ckpt.rng_state);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(ckpt.config_text.size()));
  w.str(ckpt.config_text);

  w.uint<std::uint32_t>(static_cast<std::uint32_t>(ckpt.tensors.size()));
  std::uint64_t offset = 0;
  for (const auto& p : ckpt.tensors) {
    const Tensor& t = p.tensor;
    w.uint<std::uint16_t>(static_cast<std::uint16_t>(p.name.size()));
    w.str(p.name);
    w.uint<std::uint8_t>(static_cast<std::uint8_t>(t.dtype()));
    w.uint<std::uint8_t>(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) w.uint<std::uint32_t>(static_cast<std::uint32_t>(d));
    w.uint<std::uint64_t>(offset);
    offset += static_cast<std::uint64_t>(t.numel()) * (t.dtype() == DType::f32 ? 4 : 8);
  }
  for (const auto& p : ckpt.tensors) {
    dispatch(p.tensor.dtype(), [&](auto tag) {
      using T = decltype(tag);
      for (T v : p.tensor.data<T>()) {
        if constexpr (std::is_same_v<T, float>) w.f32(v);
        else w.f64(v);
      }
    });
  }
  const std::uint32_t crc = crc32_of(w.buffer().data(), w.size());
  w.uint<std::uint32_t>(crc);
  return std::move(w.buffer());
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& what) {
  detail::ByteReader r(bytes.data(), bytes.size(), what);
  if (r.str(kMagicSize) != std::string_view(kMagic, kMagicSize)) {
    throw DataError(what + ": bad magic at offset 0 (not an LGTSMCK1 checkpoint)");
  }
  const auto version = r.uint<std::uint8_t>();
  if (version != kCheckpointVersion) {
    throw DataError(what + ": unsupported checkpoint version " + std::to_string(version) +
                    " at offset " + std::to_string(kMagicSize) + " (this build reads version " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  if (bytes.size() < kMagicSize + 1 + 4) throw DataError(what + ": truncated before checksum");
  const std::size_t crc_offset = bytes.size() - 4;
  detail::ByteReader tail(bytes.data() + crc_offset, 4, what);
  const auto stored = tail.uint<std::uint32_t>();
  const auto computed = crc32_of(bytes.data(), crc_offset);
  if (stored != computed) {
    throw DataError(what + ": CRC32 mismatch for bytes [0, " + std::to_string(crc_offset) +
                    "), checksum at offset " + std::to_string(crc_offset) + " (stored " +
                    std::to_string(stored) + ", computed " + std::to_string(computed) + ")");
  }

  detail::ByteReader body(bytes.data(), crc_offset, what);
  body.str(kMagicSize + 1);
  Checkpoint ckpt;
  const auto stage_offset = body.pos();
  const auto stage = body.uint<std::uint8_t>();
  if (stage > 1) {
    throw DataError(what + ": invalid stage byte " + std::to_string(stage) + " at offset " +
                    std::to_string(stage_offset));
  }
  ckpt.stage = static_cast<Stage>(stage);
  ckpt.step = body.uint<std::uint64_t>();
  ckpt.adam_g_steps = body.uint<std::uint64_t>();
  ckpt.adam_d_steps = body.uint<std::uint64_t>();
  ckpt.rng_state = body.str(body.uint<std::uint32_t>());
  ckpt.config_text = body.str(body.uint<std::uint32_t>());

  struct Entry {
    std::string name;
    DType dtype;
    Shape shape;
    std::uint64_t offset;
    std::size_t manifest_pos;
  };
  std::vector<Entry> entries(body.uint<std::uint32_t>());
  for (auto& e : entries) {
    e.manifest_pos = body.pos();
    e.name = body.str(body.uint<std::uint16_t>());
    const auto dt = body.uint<std::uint8_t>();
    if (dt > 1) {
      throw DataError(what + ": invalid dtype " + std::to_string(dt) + " for '" + e.name +
                      "' at offset " + std::to_string(body.pos() - 1));
    }
    e.dtype = static_cast<DType>(dt);
    const auto rank = body.uint<std::uint8_t>();
    for (int i = 0; i < rank; ++i) e.shape.push_back(body.uint<std::uint32_t>());
    e.offset = body.uint<std::uint64_t>();
  }
  const std::size_t payload_start = body.pos();
  std::uint64_t expected = 0;
  for (const auto& e : entries) {
    if (e.offset != expected) {
      throw DataError(what + ": payload offset " + std::to_string(e.offset) + " for '" + e.name +
                      "' (manifest offset " + std::to_string(e.manifest_pos) + ") expected " +
                      std::to_string(expected));
    }
    Tensor t = Tensor::zeros(e.shape, e.dtype);
    dispatch(e.dtype, [&](auto tag) {
      using T = decltype(tag);
      for (T& v : t.data<T>()) {
        if constexpr (std::is_same_v<T, float>) v = body.f32();
        else v = body.f64();
      }
    });
    expected += static_cast<std::uint64_t>(t.numel()) * (e.dtype == DType::f32 ? 4 : 8);
    ckpt.tensors.push_back({e.name, t});
  }
  if (!body.done()) {
    throw DataError(what + ": " + std::to_string(body.remaining()) +
                    " unexpected trailing bytes at offset " + std::to_string(body.pos()) +
                    " (payload began at " + std::to_string(payload_start) + ")");
  }
  check_unique_names(ckpt.tensors);
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  detail::write_file(path.string(), encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file(path.string()), path.string());
}

}  // namespace lgtsm
