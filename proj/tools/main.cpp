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

// lgtsm command-line tool. Exit codes: 0 ok, 1 usage, 2 data error,
// 3 numeric failure.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lgtsm/checkpoint.hpp"
#include "lgtsm/config.hpp"
#include "lgtsm/dataset.hpp"
#include "lgtsm/errors.hpp"
#include "lgtsm/evaluate.hpp"
#include "lgtsm/gradcheck.hpp"
#include "lgtsm/maskgen.hpp"
#include "lgtsm/networks.hpp"
#include "lgtsm/parallel.hpp"
#include "lgtsm/tape.hpp"
#include "lgtsm/trainer.hpp"

namespace fs = std::filesystem;
using namespace lgtsm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::int64_t> parse_dims(const std::string& text, std::size_t count) {
  std::vector<std::int64_t> dims;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto x = text.find('x', start);
    const std::string part = text.substr(start, x == std::string::npos ? std::string::npos : x - start);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(part, &used);
      if (used != part.size() || v <= 0) throw std::invalid_argument(part);
      dims.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("bad dimension '" + part + "' in '" + text + "'");
    }
    if (x == std::string::npos) break;
    start = x + 1;
  }
  if (dims.size() != count) {
    throw UsageError("expected " + std::to_string(count) + " dimensions in '" + text + "'");
  }
  return dims;
}

std::pair<double, double> parse_ratio(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError("--ratio expects lo:hi, got '" + text + "'");
  try {
    const double lo = std::stod(text.substr(0, colon));
    const double hi = std::stod(text.substr(colon + 1));
    if (!(lo >= 0 && lo < hi && hi <= 1)) throw std::invalid_argument(text);
    return {lo, hi};
  } catch (const std::exception&) {
    throw UsageError("--ratio must satisfy 0 <= lo < hi <= 1, got '" + text + "'");
  }
}

// --- train ---------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string resume;
  std::vector<std::string> overrides;
  std::string out;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  TrainConfig cfg = TrainConfig::load(a.config);
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    try {
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    } catch (const ShapeError& e) {
      throw UsageError(e.what());
    }
  }
  if (!a.out.empty()) cfg.out_dir = a.out;
  try {
    cfg.validate();
  } catch (const ShapeError& e) {
    throw UsageError(e.what());
  }
  auto [train, val] = load_datasets(cfg);
  Trainer trainer(cfg, std::move(train), std::move(val));
  if (!a.resume.empty()) {
    trainer.restore(load_checkpoint(a.resume));
    std::printf("resumed %s at %s step %llu\n", a.resume.c_str(), stage_name(trainer.stage()),
                static_cast<unsigned long long>(trainer.stage_step()));
  }
  fs::create_directories(cfg.out_dir);
  cfg.save(fs::path(cfg.out_dir) / "config.txt");

  TrainHooks hooks;
  hooks.on_step = [&](const StepLog& s) {
    if (!a.quiet) std::printf("%s\n", s.format(cfg.weights).c_str());
    std::fflush(stdout);
  };
  hooks.on_eval = [](const EvalLog& e) {
    std::printf("eval stage=%s step=%llu val_l1=%.6g masked_mse=%.6g zero_fill_mse=%.6g\n",
                stage_name(e.stage), static_cast<unsigned long long>(e.step), e.metrics.l1,
                e.metrics.masked_mse, e.metrics.zero_fill_mse);
    std::fflush(stdout);
  };
  hooks.on_checkpoint = [](const fs::path& p) { std::printf("checkpoint %s\n", p.c_str()); };
  const TrainSummary summary = trainer.run(hooks);
  if (summary.plateau_stop) std::printf("pretraining stopped early: validation l1 plateaued\n");
  std::printf("done; last checkpoint %s\n", summary.last_checkpoint.c_str());
  return kExitOk;
}

// --- inpaint -------------------------------------------------------------

struct InpaintArgs {
  std::string ckpt, frames, masks, out;
  bool causal = false;
};

int cmd_inpaint(const InpaintArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.ckpt);
  const TrainConfig cfg = TrainConfig::parse(ckpt.config_text);
  Generator gen = generator_from_checkpoint(ckpt, a.causal ? std::optional<bool>(true) : std::nullopt);
  const FrameSequence frames = read_frames(a.frames);
  const MaskVideo mask = read_mask_frames(a.masks);
  if (mask.frames() != frames.length() || mask.height() != frames.height() ||
      mask.width() != frames.width()) {
    throw DataError("mask volume " + std::to_string(mask.frames()) + "x" +
                    std::to_string(mask.height()) + "x" + std::to_string(mask.width()) +
                    " does not match frames " + std::to_string(frames.length()) + "x" +
                    std::to_string(frames.height()) + "x" + std::to_string(frames.width()));
  }
  if (frames.height() % 4 != 0 || frames.width() % 4 != 0) {
    throw DataError("frame size " + std::to_string(frames.width()) + "x" +
                    std::to_string(frames.height()) + " must be a multiple of 4 in each dimension");
  }
  Tape::Paused paused;
  const Tensor video = normalize(frames, cfg.dtype);
  const Tensor m = mask.to_tensor(cfg.dtype);
  const Tensor out = gen.forward(apply_mask(video, m), m, false);
  check_finite(out, "inpaint");
  FrameSequence result = denormalize(composite_output(out, video, m));
  result.fps = frames.fps;
  write_frames(a.out, result);
  std::printf("wrote %lld frames to %s (mask ratio %.4f)\n",
              static_cast<long long>(result.length()), a.out.c_str(), mask.ratio());
  return kExitOk;
}

// --- gradcheck -----------------------------------------------------------

int cmd_gradcheck(const std::string& component, double tolerance) {
  GradComponent c;
  try {
    c = parse_grad_component(component);
  } catch (const ShapeError& e) {
    throw UsageError(e.what());
  }
  const GradCheckReport report = run_gradcheck(gradcheck_cases(c), tolerance);
  std::printf("%s", report.format().c_str());
  return report.passed() ? kExitOk : kExitNumeric;
}

// --- paramreport ---------------------------------------------------------

int cmd_paramreport(const std::string& shape, int runs, std::int64_t cbase) {
  const auto d = parse_dims(shape, 4);
  if (d[2] % 4 != 0 || d[3] % 4 != 0) throw UsageError("--shape H and W must be multiples of 4");
  if (runs < 1) throw UsageError("--runs must be >= 1");
  GeneratorConfig gcfg;
  gcfg.base_channels = cbase;
  DiscriminatorConfig dcfg;
  dcfg.base_channels = cbase;
  Generator gen(gcfg, DType::f32, 1);
  Generator3D gen3d = build_3dconv_variant(gcfg, DType::f32, 1);
  Discriminator disc(dcfg, DType::f32, 2);
  const auto n_gen = count_scalars(gen.parameters());
  const auto n_3d = count_scalars(gen3d.parameters());
  const auto n_disc = count_scalars(disc.parameters());

  Tape::Paused paused;
  const Tensor video = Tensor::zeros({d[0], 3, d[1], d[2], d[3]}, DType::f32);
  const Tensor mask = Tensor::zeros({d[0], 1, d[1], d[2], d[3]}, DType::f32);
  auto median_seconds = [&](auto&& fn) {
    std::vector<double> t;
    for (int i = 0; i < runs; ++i) {
      const auto start = std::chrono::steady_clock::now();
      fn();
      t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    std::sort(t.begin(), t.end());
    return t[t.size() / 2];
  };
  const double t_gen = median_seconds([&] { gen.forward(video, mask, false); });
  const double t_3d = median_seconds([&] { gen3d.forward(video, mask); });

  std::printf("base channels %lld, shape %lldx3x%lldx%lldx%lld, %d threads, median of %d runs\n",
              static_cast<long long>(cbase), static_cast<long long>(d[0]),
              static_cast<long long>(d[1]), static_cast<long long>(d[2]),
              static_cast<long long>(d[3]), num_threads(), runs);
  std::printf("%-24s %12s %12s\n", "model", "params", "forward_s");
  std::printf("%-24s %12lld %12.4f\n", "lgtsm_generator", static_cast<long long>(n_gen), t_gen);
  std::printf("%-24s %12lld %12.4f\n", "conv3d_generator", static_cast<long long>(n_3d), t_3d);
  std::printf("%-24s %12lld %12s\n", "discriminator", static_cast<long long>(n_disc), "-");
  std::printf("param ratio lgtsm/3d   %.4f\n", static_cast<double>(n_gen) / static_cast<double>(n_3d));
  std::printf("time ratio 3d/lgtsm    %.3f\n", t_3d / t_gen);
  return kExitOk;
}

// --- evaluate ------------------------------------------------------------

Dataset open_dataset(const std::string& spec, const TrainConfig& cfg) {
  if (spec.rfind("synthetic", 0) == 0) {
    std::size_t n = static_cast<std::size_t>(cfg.val_clips);
    if (spec.size() > 9) {
      if (spec[9] != ':') throw UsageError("--data synthetic[:N]");
      try {
        n = std::stoul(spec.substr(10));
      } catch (const std::exception&) {
        throw UsageError("--data synthetic[:N]: bad count");
      }
    }
    return Dataset::synthetic(n, mix_seed(cfg.seed, 99), cfg.length, cfg.height, cfg.width);
  }
  if (fs::is_directory(spec)) return Dataset({read_frames(spec)});
  return Dataset::from_manifest(spec);
}

int cmd_evaluate(const std::string& ckpt_path, const std::string& data, int buckets,
                 std::uint64_t seed) {
  if (buckets < 1 || buckets > 10) throw UsageError("--buckets must lie in [1, 10]");
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const TrainConfig cfg = TrainConfig::parse(ckpt.config_text);
  Generator gen = generator_from_checkpoint(ckpt);
  const Dataset dataset = open_dataset(data, cfg);
  const FeatureExtractor fx = make_extractor(cfg);
  EvalOptions opt;
  opt.buckets = buckets;
  opt.seed = seed;
  opt.dtype = cfg.dtype;
  opt.batch = cfg.batch;
  const EvalReport report = evaluate(
      [&](const Batch& b) { return gen.forward(b.masked_video, b.mask, false); }, dataset, fx, opt);
  std::printf("%s", report.format().c_str());
  return kExitOk;
}

// --- maskgen -------------------------------------------------------------

struct MaskgenArgs {
  std::string kind = "stroke";
  std::string ratio = "0.1:0.2";
  std::string out;
  std::string shape = "8x64x64";
  int motion = 2;
  std::uint64_t seed = 0;
};

int cmd_maskgen(const MaskgenArgs& a) {
  MaskSpec spec;
  try {
    spec.kind = parse_mask_kind(a.kind);
  } catch (const ShapeError& e) {
    throw UsageError(e.what());
  }
  std::tie(spec.ratio_lo, spec.ratio_hi) = parse_ratio(a.ratio);
  if (a.motion < 0) throw UsageError("--motion must be >= 0");
  spec.motion = a.motion;
  spec.seed = a.seed;
  const auto d = parse_dims(a.shape, 3);
  if (d[1] < 16 || d[2] < 16) throw UsageError("--shape needs H, W >= 16");
  const MaskVideo mask = generate_mask(spec, d[0], d[1], d[2]);
  write_mask_frames(a.out, mask);
  std::printf("wrote %lld %s mask frames to %s, ratio %.6f\n", static_cast<long long>(mask.frames()),
              mask_kind_name(spec.kind), a.out.c_str(), mask.ratio());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  configure_threads_from_env();

  CLI::App app{"LGTSM video inpainting: training, inference and verification"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Two-stage training (pretrain, then adversarial finetune)");
  train->add_option("--config", train_args.config, "key = value config file")->required();
  train->add_option("--resume", train_args.resume, "Checkpoint to continue from");
  train->add_option("--set", train_args.overrides, "Override a config key (key=value), repeatable");
  train->add_option("--out", train_args.out, "Output directory (overrides out_dir)");
  train->add_flag("--quiet", train_args.quiet, "Only print evaluations and checkpoints");

  InpaintArgs inpaint_args;
  auto* inpaint = app.add_subcommand("inpaint", "Fill masked regions of a frame sequence");
  inpaint->add_option("--ckpt", inpaint_args.ckpt, "Checkpoint")->required();
  inpaint->add_option("--frames", inpaint_args.frames, "Directory of frame_%05d.ppm")->required();
  inpaint->add_option("--masks", inpaint_args.masks, "Directory of frame_%05d.pbm")->required();
  inpaint->add_option("--out", inpaint_args.out, "Output directory")->required();
  inpaint->add_flag("--causal", inpaint_args.causal, "Never read future frames (online mode)");

  std::string component = "all";
  double tolerance = 1e-4;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite at f64");
  gradcheck->add_option("--component", component, "all, ops, layer, generator or losses");
  gradcheck->add_option("--tolerance", tolerance, "Maximum relative error");

  std::string shape = "1x8x64x64";
  int runs = 5;
  std::int64_t cbase = 32;
  auto* paramreport = app.add_subcommand("paramreport", "Parameter counts and forward timings");
  paramreport->add_option("--shape", shape, "BxLxHxW");
  paramreport->add_option("--runs", runs, "Timed runs per model (median reported)");
  paramreport->add_option("--base-channels", cbase, "Generator and discriminator width");

  std::string eval_ckpt, eval_data;
  int buckets = 7;
  std::uint64_t eval_seed = 7;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Per mask-ratio bucket MSE and proxy distance");
  evaluate_cmd->add_option("--ckpt", eval_ckpt, "Checkpoint")->required();
  evaluate_cmd->add_option("--data", eval_data,
                           "Manifest file, clip directory, or synthetic[:N]")->required();
  evaluate_cmd->add_option("--buckets", buckets, "Number of 10% ratio buckets");
  evaluate_cmd->add_option("--seed", eval_seed, "Mask seed");

  MaskgenArgs mask_args;
  auto* maskgen = app.add_subcommand("maskgen", "Generate a free-form mask video as PBM frames");
  maskgen->add_option("--kind", mask_args.kind, "stroke, bbox or object_like");
  maskgen->add_option("--ratio", mask_args.ratio, "Accepted volume ratio lo:hi");
  maskgen->add_option("--out", mask_args.out, "Output directory")->required();
  maskgen->add_option("--shape", mask_args.shape, "LxHxW");
  maskgen->add_option("--motion", mask_args.motion, "Max translation per frame in pixels");
  maskgen->add_option("--seed", mask_args.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train) return cmd_train(train_args);
    if (*inpaint) return cmd_inpaint(inpaint_args);
    if (*gradcheck) return cmd_gradcheck(component, tolerance);
    if (*paramreport) return cmd_paramreport(shape, runs, cbase);
    if (*evaluate_cmd) return cmd_evaluate(eval_ckpt, eval_data, buckets, eval_seed);
    if (*maskgen) return cmd_maskgen(mask_args);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}
