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

#include "lgtsm/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "lgtsm/errors.hpp"
#include "lgtsm/maskgen.hpp"
#include "lgtsm/tape.hpp"

namespace lgtsm {

namespace {

// Seed-stream labels; any distinct constants would do.
constexpr std::uint64_t kSamplerStream = 1;
constexpr std::uint64_t kRngStream = 2;
constexpr std::uint64_t kExtractorStream = 3;
constexpr std::uint64_t kTrainDataStream = 10;
constexpr std::uint64_t kValDataStream = 11;
constexpr std::uint64_t kValMaskStream = 12;
constexpr std::uint64_t kFinetuneStepOffset = std::uint64_t{1} << 32;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void require_finite(double v, const char* what, Stage stage, std::uint64_t step,
                    const std::filesystem::path& last_good) {
  if (std::isfinite(v)) return;
  throw NumericError(std::string("non-finite ") + what + " at " + stage_name(stage) + " step " +
                     std::to_string(step) + "; last good checkpoint: " +
                     (last_good.empty() ? std::string("none") : last_good.string()));
}

// Restores requires_grad flags on scope exit.
class FreezeParameters {
 public:
  explicit FreezeParameters(std::vector<Parameter> params) : params_(std::move(params)) {
    for (auto& p : params_) p.tensor.set_requires_grad(false);
  }
  ~FreezeParameters() {
    for (auto& p : params_) p.tensor.set_requires_grad(true);
  }
  FreezeParameters(const FreezeParameters&) = delete;
  FreezeParameters& operator=(const FreezeParameters&) = delete;

 private:
  std::vector<Parameter> params_;
};

}  // namespace

std::string StepLog::format(const LossWeights& w) const {
  std::string s = std::string("stage=") + stage_name(stage) + " step=" + std::to_string(step) +
                  " l1=" + fmt(l1) + "*" + fmt(w.l1) + " perc=" + fmt(perc) + "*" + fmt(w.perc) +
                  " style=" + fmt(style) + "*" + fmt(w.style);
  if (adv) s += " adv=" + fmt(*adv) + "*" + fmt(w.adv);
  if (d_loss) s += " d=" + fmt(*d_loss);
  s += " total=" + fmt(total);
  return s;
}

void assign_values(Tensor& dst, const Tensor& src, const std::string& name) {
  if (!src.defined()) throw DataError("checkpoint lacks tensor '" + name + "'");
  if (src.shape() != dst.shape()) {
    throw DataError("checkpoint tensor '" + name + "' has shape " + shape_str(src.shape()) +
                    ", expected " + shape_str(dst.shape()));
  }
  dispatch(dst.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto d = dst.data<T>();
    dispatch(src.dtype(), [&](auto stag) {
      using S = decltype(stag);
      auto s = src.data<S>();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<T>(s[i]);
    });
  });
}

Generator generator_from_checkpoint(const Checkpoint& ckpt, std::optional<bool> causal) {
  const TrainConfig cfg = TrainConfig::parse(ckpt.config_text);
  GeneratorConfig g = cfg.generator_config();
  if (causal) g.shift.causal = *causal;
  Generator gen(g, cfg.dtype, cfg.seed);
  for (auto& p : gen.parameters()) assign_values(p.tensor, ckpt.find(p.name), p.name);
  for (auto& p : gen.buffers()) assign_values(p.tensor, ckpt.find(p.name), p.name);
  return gen;
}

std::pair<Dataset, Dataset> load_datasets(const TrainConfig& cfg) {
  if (cfg.manifest.empty()) {
    return {Dataset::synthetic(static_cast<std::size_t>(cfg.train_clips),
                               mix_seed(cfg.seed, kTrainDataStream), cfg.length, cfg.height,
                               cfg.width),
            Dataset::synthetic(static_cast<std::size_t>(cfg.val_clips),
                               mix_seed(cfg.seed, kValDataStream), cfg.length, cfg.height,
                               cfg.width)};
  }
  Dataset all = Dataset::from_manifest(cfg.manifest);
  std::vector<FrameSequence> val;
  for (std::size_t i = 0; i < std::min<std::size_t>(all.size(), static_cast<std::size_t>(cfg.val_clips)); ++i) {
    val.push_back(all.at(i));
  }
  return {std::move(all), Dataset(std::move(val))};
}

FeatureExtractor make_extractor(const TrainConfig& cfg) {
  return cfg.extractor.empty()
             ? FeatureExtractor::seeded_random(mix_seed(cfg.seed, kExtractorStream), cfg.dtype)
             : FeatureExtractor::load(cfg.extractor, cfg.dtype);
}

Batch validation_batch(const Dataset& val, const TrainConfig& cfg, DType dtype) {
  std::vector<const FrameSequence*> clips;
  for (std::size_t i = 0; i < val.size(); ++i) clips.push_back(&val.at(i));
  return make_batch(clips, cfg.mask_spec(mix_seed(cfg.seed, kValMaskStream)), dtype);
}

Trainer::Trainer(TrainConfig cfg, Dataset train, Dataset validation)
    : cfg_((cfg.validate(), std::move(cfg))),
      train_(std::move(train)),
      val_(std::move(validation)),
      models_(cfg_.generator_config(), cfg_.discriminator_config(), cfg_.dtype, cfg_.seed),
      adam_g_(models_.parameters(Component::generator),
              AdamOptions{cfg_.lr_g, cfg_.beta1, cfg_.beta2, 1e-8}),
      adam_d_(models_.parameters(Component::discriminator),
              AdamOptions{cfg_.lr_d, cfg_.beta1, cfg_.beta2, 1e-8}),
      fx_(make_extractor(cfg_)),
      sampler_(train_.size(), cfg_.batch, mix_seed(cfg_.seed, kSamplerStream)),
      rng_(mix_seed(cfg_.seed, kRngStream)),
      stage_(cfg_.stage) {
  for (const Dataset* d : {&train_, &val_}) {
    if (d->size() == 0) throw DataError("training needs a nonempty dataset");
    if (d->length() != cfg_.length || d->height() != cfg_.height || d->width() != cfg_.width) {
      throw DataError("dataset clips are " + std::to_string(d->length()) + "x" +
                      std::to_string(d->height()) + "x" + std::to_string(d->width()) +
                      " but the config asks for " + std::to_string(cfg_.length) + "x" +
                      std::to_string(cfg_.height) + "x" + std::to_string(cfg_.width));
    }
  }
}

std::filesystem::path Trainer::checkpoint_path(const TrainConfig& cfg, Stage stage,
                                               std::uint64_t step) {
  char name[64];
  std::snprintf(name, sizeof(name), "%s_%08llu.ckpt", stage_name(stage),
                static_cast<unsigned long long>(step));
  return std::filesystem::path(cfg.out_dir) / name;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ck;
  ck.stage = stage_;
  ck.step = step_;
  ck.adam_g_steps = static_cast<std::uint64_t>(adam_g_.steps());
  ck.adam_d_steps = static_cast<std::uint64_t>(adam_d_.steps());
  std::ostringstream rng;
  rng << rng_;
  ck.rng_state = rng.str();
  ck.config_text = cfg_.to_text();
  for (const auto& p : models_.parameters()) ck.tensors.push_back({p.name, p.tensor.clone()});
  for (const auto& p : models_.buffers()) ck.tensors.push_back({p.name, p.tensor.clone()});
  for (const auto& [tag, adam] : {std::pair{"G", &adam_g_}, std::pair{"D", &adam_d_}}) {
    const auto& params = adam->params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      ck.tensors.push_back({std::string("adam.") + tag + ".m." + params[i].name,
                            adam->first_moments()[i].clone()});
      ck.tensors.push_back({std::string("adam.") + tag + ".v." + params[i].name,
                            adam->second_moments()[i].clone()});
    }
  }
  return ck;
}

void Trainer::restore(const Checkpoint& ck) {
  const TrainConfig saved = TrainConfig::parse(ck.config_text);
  const auto mine = cfg_.as_map(), theirs = saved.as_map();
  for (const char* const* k = TrainConfig::architecture_keys(); *k; ++k) {
    if (mine.at(*k) != theirs.at(*k)) {
      throw DataError(std::string("resume: config key '") + *k + "' is " + mine.at(*k) +
                      " but the checkpoint was trained with " + theirs.at(*k));
    }
  }
  if (ck.stage == Stage::finetune && cfg_.stage == Stage::pretrain) {
    throw DataError("resume: checkpoint is from the finetune stage but the config stage is pretrain");
  }
  for (auto& p : models_.parameters()) assign_values(p.tensor, ck.find(p.name), p.name);
  for (auto& p : models_.buffers()) assign_values(p.tensor, ck.find(p.name), p.name);
  for (auto [tag, adam] : {std::pair{"G", &adam_g_}, std::pair{"D", &adam_d_}}) {
    const auto& params = adam->params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const std::string m = std::string("adam.") + tag + ".m." + params[i].name;
      const std::string v = std::string("adam.") + tag + ".v." + params[i].name;
      assign_values(adam->first_moments()[i], ck.find(m), m);
      assign_values(adam->second_moments()[i], ck.find(v), v);
    }
  }
  adam_g_.set_steps(static_cast<std::int64_t>(ck.adam_g_steps));
  adam_d_.set_steps(static_cast<std::int64_t>(ck.adam_d_steps));
  std::istringstream rng(ck.rng_state);
  rng >> rng_;
  if (rng.fail()) throw DataError("resume: unreadable RNG state in checkpoint");
  if (ck.stage == cfg_.stage) {
    stage_ = ck.stage;
    step_ = ck.step;
  } else {
    // Pretrained weights seeding a finetune run.
    stage_ = Stage::finetune;
    step_ = 0;
  }
}

Batch Trainer::next_batch() {
  const std::uint64_t mask_seed = rng_();
  const std::uint64_t stream_step =
      step_ + (stage_ == Stage::finetune ? kFinetuneStepOffset : 0);
  return make_batch(train_, sampler_, cfg_.mask_spec(mask_seed), stream_step, cfg_.dtype);
}

StepLog Trainer::step() {
  const Batch batch = next_batch();
  Generator& G = models_.generator;
  Discriminator& D = models_.discriminator;
  StepLog log;
  log.stage = stage_;
  log.step = step_ + 1;

  std::vector<Tensor> target_features;
  {
    Tape::Paused paused;
    target_features = fx_.features(batch.video);
  }

  if (stage_ == Stage::finetune) {
    Tensor fake;
    {
      Tape::Paused paused;
      fake = G.forward(batch.masked_video, batch.mask, false);
    }
    Tape tape;
    Tensor d_loss;
    {
      Tape::Recording rec(tape);
      const Tensor real_scores = D.forward(batch.video, true);
      const Tensor fake_scores = D.forward(fake, false);
      d_loss = d_hinge_loss(real_scores, fake_scores, cfg_.hinge);
    }
    log.d_loss = d_loss.item();
    require_finite(*log.d_loss, "discriminator loss", stage_, log.step, last_good_);
    adam_d_.zero_grad();
    tape.backward(d_loss);
    adam_d_.step();
    adam_d_.zero_grad();
  }

  Tape tape;
  Tensor total;
  {
    FreezeParameters frozen(models_.parameters(Component::discriminator));
    Tape::Recording rec(tape);
    const Tensor out = G.forward(batch.masked_video, batch.mask, true);
    LossComponents c;
    c.l1 = l1_loss(out, batch.video);
    const auto out_features = fx_.features(out);
    c.perc = perceptual_loss(out_features, target_features);
    c.style = style_loss(out_features, target_features);
    if (stage_ == Stage::finetune) c.adv = g_adv_loss(D.forward(out, false));
    total = total_loss(c, cfg_.weights);
    log.l1 = c.l1.item();
    log.perc = c.perc.item();
    log.style = c.style.item();
    if (c.adv.defined()) log.adv = c.adv.item();
    log.total = total.item();
  }
  require_finite(log.total, "generator loss", stage_, log.step, last_good_);
  adam_g_.zero_grad();
  tape.backward(total);
  adam_g_.step();
  adam_g_.zero_grad();
  ++step_;
  return log;
}

ValidationMetrics Trainer::validate() {
  Tape::Paused paused;
  const Batch all = validation_batch(val_, cfg_, cfg_.dtype);
  const std::int64_t n = all.size();
  double abs_sum = 0, sq_sum = 0, zero_sq_sum = 0, masked = 0;
  std::int64_t elements = 0;
  for (std::int64_t start = 0; start < n; start += cfg_.batch) {
    const std::int64_t end = std::min(n, start + cfg_.batch);
    // Re-slice the fixed batch so chunking does not change the masks.
    Batch chunk;
    const std::int64_t per_v = all.video.numel() / n, per_m = all.mask.numel() / n;
    auto slice = [&](const Tensor& t, std::int64_t per) {
      Shape s = t.shape();
      s[0] = end - start;
      Tensor out = Tensor::zeros(s, t.dtype());
      for (std::int64_t i = 0; i < out.numel(); ++i) out.set(i, t.at(start * per + i));
      return out;
    };
    chunk.video = slice(all.video, per_v);
    chunk.mask = slice(all.mask, per_m);
    chunk.masked_video = slice(all.masked_video, per_v);
    const Tensor out = models_.generator.forward(chunk.masked_video, chunk.mask, false);
    const Tensor comp = composite_output(out, chunk.video, chunk.mask);
    const auto o = out.to_vector(), v = chunk.video.to_vector(), c = comp.to_vector();
    const auto m = chunk.mask.to_vector();
    const std::int64_t B = end - start, L = chunk.video.dim(2);
    const std::int64_t HW = chunk.video.dim(3) * chunk.video.dim(4);
    for (std::size_t i = 0; i < o.size(); ++i) abs_sum += std::abs(o[i] - v[i]);
    elements += static_cast<std::int64_t>(o.size());
    for (std::int64_t b = 0; b < B; ++b) {
      for (std::int64_t ch = 0; ch < 3; ++ch) {
        for (std::int64_t p = 0; p < L * HW; ++p) {
          const double mk = m[static_cast<std::size_t>(b * L * HW + p)];
          if (mk == 0.0) continue;
          const auto idx = static_cast<std::size_t>((b * 3 + ch) * L * HW + p);
          const double dc = (c[idx] - v[idx]) / 2.0, dz = (0.0 - v[idx]) / 2.0;
          sq_sum += dc * dc;
          zero_sq_sum += dz * dz;
          masked += 1.0;
        }
      }
    }
  }
  ValidationMetrics vm;
  vm.l1 = abs_sum / static_cast<double>(elements);
  vm.masked_mse = masked > 0 ? sq_sum / masked : 0.0;
  vm.zero_fill_mse = masked > 0 ? zero_sq_sum / masked : 0.0;
  return vm;
}

void Trainer::advance_stage() {
  stage_ = Stage::finetune;
  step_ = 0;
}

TrainSummary Trainer::run(const TrainHooks& hooks, bool write_checkpoints) {
  TrainSummary summary;
  auto save = [&] {
    if (!write_checkpoints) return;
    const auto path = checkpoint_path(cfg_, stage_, step_);
    save_checkpoint(path, checkpoint());
    last_good_ = path;
    summary.last_checkpoint = path;
    if (hooks.on_checkpoint) hooks.on_checkpoint(path);
  };
  auto evaluate_now = [&] {
    EvalLog e{stage_, step_, validate()};
    summary.evals.push_back(e);
    if (hooks.on_eval) hooks.on_eval(e);
    return e.metrics.l1;
  };

  if (stage_ == Stage::pretrain) {
    std::vector<double> history;
    history.push_back(evaluate_now());
    const auto total = static_cast<std::uint64_t>(cfg_.pretrain_steps);
    while (step_ < total) {
      summary.steps.push_back(step());
      if (hooks.on_step) hooks.on_step(summary.steps.back());
      if (step_ % static_cast<std::uint64_t>(cfg_.checkpoint_every) == 0 && step_ < total) save();
      if (step_ % static_cast<std::uint64_t>(cfg_.eval_every) == 0 || step_ == total) {
        history.push_back(evaluate_now());
        const auto k = static_cast<std::size_t>(cfg_.plateau_evals);
        if (k > 0 && history.size() > k && step_ < total) {
          const double old = history[history.size() - 1 - k];
          if (old > 0 && (old - history.back()) / old < 0.01) {
            summary.plateau_stop = true;
            break;
          }
        }
      }
    }
    save();
    advance_stage();
  }

  const auto total = static_cast<std::uint64_t>(cfg_.finetune_steps);
  if (step_ < total) {
    while (step_ < total) {
      summary.steps.push_back(step());
      if (hooks.on_step) hooks.on_step(summary.steps.back());
      if (step_ % static_cast<std::uint64_t>(cfg_.checkpoint_every) == 0 && step_ < total) save();
      if (step_ % static_cast<std::uint64_t>(cfg_.eval_every) == 0 || step_ == total) {
        evaluate_now();
      }
    }
    save();
  }
  return summary;
}

}  // namespace lgtsm
