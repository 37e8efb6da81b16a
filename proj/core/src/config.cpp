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

#include "lgtsm/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "lgtsm/errors.hpp"

namespace lgtsm {

const char* stage_name(Stage s) { return s == Stage::pretrain ? "pretrain" : "finetune"; }

Stage parse_stage(const std::string& name) {
  if (name == "pretrain") return Stage::pretrain;
  if (name == "finetune") return Stage::finetune;
  throw ShapeError("unknown stage '" + name + "' (expected pretrain or finetune)");
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ShapeError("config key '" + key + "': '" + v + "' is not a number");
  }
  return out;
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ShapeError("config key '" + key + "': '" + v + "' is not an integer");
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ShapeError("config key '" + key + "': '" + v + "' is not an unsigned integer");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ShapeError("config key '" + key + "': expected true or false, got '" + v + "'");
}

struct Field {
  const char* key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
};

#define LGTSM_INT(name, member)                                                         \
  Field {                                                                               \
    name, [](const TrainConfig& c) { return std::to_string(c.member); },                \
        [](TrainConfig& c, const std::string& k, const std::string& v) {                \
          c.member = static_cast<decltype(c.member)>(parse_int(k, v));                  \
        }                                                                               \
  }
#define LGTSM_DOUBLE(name, member)                                                      \
  Field {                                                                               \
    name, [](const TrainConfig& c) { return format_double(c.member); },                 \
        [](TrainConfig& c, const std::string& k, const std::string& v) {                \
          c.member = parse_double(k, v);                                                \
        }                                                                               \
  }
#define LGTSM_BOOL(name, member)                                                        \
  Field {                                                                               \
    name, [](const TrainConfig& c) { return std::string(c.member ? "true" : "false"); }, \
        [](TrainConfig& c, const std::string& k, const std::string& v) {                \
          c.member = parse_bool(k, v);                                                  \
        }                                                                               \
  }
#define LGTSM_STRING(name, member)                                                      \
  Field {                                                                               \
    name, [](const TrainConfig& c) { return c.member; },                                \
        [](TrainConfig& c, const std::string&, const std::string& v) { c.member = v; }  \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"stage", [](const TrainConfig& c) { return std::string(stage_name(c.stage)); },
            [](TrainConfig& c, const std::string&, const std::string& v) { c.stage = parse_stage(v); }},
      LGTSM_INT("pretrain_steps", pretrain_steps),
      LGTSM_INT("finetune_steps", finetune_steps),
      LGTSM_DOUBLE("lr_g", lr_g),
      LGTSM_DOUBLE("lr_d", lr_d),
      LGTSM_DOUBLE("beta1", beta1),
      LGTSM_DOUBLE("beta2", beta2),
      LGTSM_DOUBLE("lambda_l1", weights.l1),
      LGTSM_DOUBLE("lambda_perc", weights.perc),
      LGTSM_DOUBLE("lambda_style", weights.style),
      LGTSM_DOUBLE("lambda_adv", weights.adv),
      Field{"hinge",
            [](const TrainConfig& c) {
              return std::string(c.hinge == HingeSign::paper ? "paper" : "standard");
            },
            [](TrainConfig& c, const std::string& k, const std::string& v) {
              if (v == "standard") c.hinge = HingeSign::standard;
              else if (v == "paper") c.hinge = HingeSign::paper;
              else throw ShapeError("config key '" + k + "': expected standard or paper");
            }},
      LGTSM_INT("batch", batch),
      LGTSM_INT("length", length),
      LGTSM_INT("height", height),
      LGTSM_INT("width", width),
      Field{"seed", [](const TrainConfig& c) { return std::to_string(c.seed); },
            [](TrainConfig& c, const std::string& k, const std::string& v) { c.seed = parse_uint(k, v); }},
      LGTSM_INT("base_channels", base_channels),
      LGTSM_INT("kernel", kernel),
      LGTSM_INT("d_base_channels", d_base_channels),
      LGTSM_BOOL("causal", causal),
      Field{"shift_mode",
            [](const TrainConfig& c) {
              return std::string(c.shift_mode == ShiftMode::learnable ? "learnable" : "fixed_tsm");
            },
            [](TrainConfig& c, const std::string& k, const std::string& v) {
              if (v == "learnable") c.shift_mode = ShiftMode::learnable;
              else if (v == "fixed_tsm") c.shift_mode = ShiftMode::fixed_tsm;
              else throw ShapeError("config key '" + k + "': expected learnable or fixed_tsm");
            }},
      LGTSM_BOOL("spectral_norm_g", spectral_norm_g),
      LGTSM_BOOL("spectral_norm_d", spectral_norm_d),
      Field{"dtype", [](const TrainConfig& c) { return std::string(dtype_name(c.dtype)); },
            [](TrainConfig& c, const std::string& k, const std::string& v) {
              if (v == "f32") c.dtype = DType::f32;
              else if (v == "f64") c.dtype = DType::f64;
              else throw ShapeError("config key '" + k + "': expected f32 or f64");
            }},
      LGTSM_STRING("manifest", manifest),
      LGTSM_INT("train_clips", train_clips),
      LGTSM_INT("val_clips", val_clips),
      Field{"mask_kind", [](const TrainConfig& c) { return std::string(mask_kind_name(c.mask_kind)); },
            [](TrainConfig& c, const std::string&, const std::string& v) { c.mask_kind = parse_mask_kind(v); }},
      LGTSM_DOUBLE("mask_lo", mask_lo),
      LGTSM_DOUBLE("mask_hi", mask_hi),
      LGTSM_INT("mask_motion", mask_motion),
      LGTSM_STRING("extractor", extractor),
      LGTSM_INT("eval_every", eval_every),
      LGTSM_INT("checkpoint_every", checkpoint_every),
      LGTSM_INT("plateau_evals", plateau_evals),
      LGTSM_STRING("out_dir", out_dir),
  };
  return table;
}

#undef LGTSM_INT
#undef LGTSM_DOUBLE
#undef LGTSM_BOOL
#undef LGTSM_STRING

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ShapeError("invalid config: " + what);
  };
  require(pretrain_steps >= 0 && finetune_steps >= 0, "step counts must be >= 0");
  require(lr_g > 0 && lr_d > 0, "learning rates must be > 0");
  require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, "Adam betas must lie in [0,1)");
  weights.validate();
  require(batch >= 1 && length >= 1, "batch and length must be >= 1");
  require(height >= 16 && width >= 16 && height % 4 == 0 && width % 4 == 0,
          "height and width must be multiples of 4 and at least 16");
  require(base_channels >= 4 && d_base_channels >= 1, "channel counts too small");
  require(kernel >= 1 && kernel % 2 == 1, "kernel must be odd");
  require(train_clips >= 1 && val_clips >= 1, "clip counts must be >= 1");
  require(mask_lo >= 0 && mask_lo < mask_hi && mask_hi <= 1, "mask range must satisfy 0 <= lo < hi <= 1");
  require(mask_motion >= 0, "mask_motion must be >= 0");
  require(eval_every >= 1 && checkpoint_every >= 1, "eval_every and checkpoint_every must be >= 1");
  require(plateau_evals >= 0, "plateau_evals must be >= 0");
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(*this, key, value);
      return;
    }
  }
  throw ShapeError("unknown config key '" + key + "'");
}

std::string TrainConfig::to_text() const {
  std::ostringstream out;
  for (const auto& f : fields()) out << f.key << " = " << f.get(*this) << "\n";
  return out.str();
}

std::map<std::string, std::string> TrainConfig::as_map() const {
  std::map<std::string, std::string> out;
  for (const auto& f : fields()) out[f.key] = f.get(*this);
  return out;
}

TrainConfig TrainConfig::parse(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ShapeError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ShapeError& e) {
      throw ShapeError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void TrainConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write config " + path.string());
  out << to_text();
}

GeneratorConfig TrainConfig::generator_config() const {
  GeneratorConfig g;
  g.base_channels = base_channels;
  g.kernel = kernel;
  g.shift.causal = causal;
  g.shift.mode = shift_mode;
  g.spectral_norm = spectral_norm_g;
  return g;
}

DiscriminatorConfig TrainConfig::discriminator_config() const {
  DiscriminatorConfig d;
  d.base_channels = d_base_channels;
  d.shift.causal = causal;
  d.spectral_norm = spectral_norm_d;
  return d;
}

MaskSpec TrainConfig::mask_spec(std::uint64_t mask_seed) const {
  MaskSpec m;
  m.kind = mask_kind;
  m.ratio_lo = mask_lo;
  m.ratio_hi = mask_hi;
  m.motion = mask_motion;
  m.seed = mask_seed;
  return m;
}

const char* const* TrainConfig::architecture_keys() {
  static const char* const keys[] = {"base_channels",   "kernel",          "d_base_channels",
                                     "causal",          "shift_mode",      "spectral_norm_g",
                                     "spectral_norm_d", "dtype",           nullptr};
  return keys;
}

}  // namespace lgtsm
