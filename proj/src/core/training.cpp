// SPDX-License-Identifier: Apache-2.0

#include "cycpaint/training.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cycpaint/checkpoint.hpp"
#include "cycpaint/log.hpp"

namespace cycpaint {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kMaskStream = 0x3A5C;
constexpr std::uint64_t kEpochStream = 0xE90C;

bool params_finite(const ParameterSet<float>& ps) {
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!all_finite(ps[i])) return false;
  }
  return true;
}

}  // namespace

AdamState AdamState::zeros_like(const ParameterSet<float>& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

void adam_update(ParameterSet<float>& params, const ParameterSet<float>& grads, AdamState& state,
                 double lr, double beta1, double beta2, double eps) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  const float b1 = static_cast<float>(beta1), b2 = static_cast<float>(beta2);
  const float step = static_cast<float>(lr / bc1);
  const float inv_bc2 = static_cast<float>(1.0 / bc2);
  const float e = static_cast<float>(eps);
  for (std::size_t k = 0; k < params.size(); ++k) {
    float* p = params[k].data();
    const float* g = grads[k].data();
    float* m = state.m[k].data();
    float* v = state.v[k].data();
    const std::size_t n = params[k].numel();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (1.0f - b1) * g[i];
      v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
      p[i] -= step * m[i] / (std::sqrt(v[i] * inv_bc2) + e);
    }
  }
}

TrainingState init_training(const TrainingConfig& cfg) {
  cfg.validate();
  TrainingState s;
  s.config = cfg;
  s.bundle = make_bundle<float>(cfg.generator(), cfg.discriminator(), cfg.seed);
  s.opt_C = AdamState::zeros_like(s.bundle.completion.params());
  s.opt_E = AdamState::zeros_like(s.bundle.extrapolation.params());
  s.opt_D = AdamState::zeros_like(s.bundle.discriminator.params());
  return s;
}

template <class T>
CyclePair<T> run_cycles(const ModelBundle<T>& b, const Tensor<T>& x, const BinaryMap& M,
                        const LossWeights& w, const CycleOptions& opt) {
  // Only the forward cycle carries the optional E-adversarial term.
  const CycleOptions backward_opt{opt.use_cycle_loss, false};
  return {run_cycle(b.completion, b.extrapolation, b.discriminator, x, M, w, opt),
          run_cycle(b.extrapolation, b.completion, b.discriminator, x, complement(M), w, backward_opt)};
}

template <class T>
Tensor<T> fake_pool(const CyclePair<T>& cycles) {
  return concat_batch(cycles.forward.composite, cycles.backward.composite);
}

template <class T>
double discriminator_gradients(const ModelBundle<T>& b, const Tensor<T>& x, const Tensor<T>& fakes,
                               ParameterSet<T>& disc_grads) {
  return adversarial_loss_disc_grad(b.discriminator, x, fakes, disc_grads);
}

template <class T>
ObjectiveTerms generator_gradients(const ModelBundle<T>& b, const CyclePair<T>& cycles,
                                   const LossWeights& w, const CycleOptions& opt,
                                   ParameterSet<T>* grads_C, ParameterSet<T>* grads_E,
                                   ParameterSet<T>* grads_D) {
  const CycleOptions backward_opt{opt.use_cycle_loss, false};
  ObjectiveTerms t;
  t.forward = backprop_cycle(cycles.forward, b.completion, b.extrapolation, b.discriminator, w, opt,
                             grads_C, grads_E, grads_D);
  t.backward = backprop_cycle(cycles.backward, b.extrapolation, b.completion, b.discriminator, w,
                              backward_opt, grads_E, grads_C, grads_D);
  return t;
}

LossReport make_report(const ObjectiveTerms& t, double disc_loss, const LossWeights& w) {
  LossReport r;
  r.adv_C = t.forward.adv;
  r.ctx_C = t.forward.ctx;
  r.rec_forward = t.forward.rec;
  r.adv_E_forward = t.forward.adv_second;
  r.adv_E = t.backward.adv;
  r.ctx_E = t.backward.ctx;
  r.rec_backward = t.backward.rec;
  r.disc_loss = disc_loss;
  (void)w;
  r.cyc_forward_total = t.forward.total;
  r.cyc_backward_total = t.backward.total;
  r.grand_total = total_objective(r.cyc_forward_total, r.cyc_backward_total);
  return r;
}

Mask step_mask(const TrainingConfig& cfg, long step) {
  Rng rng(derive_seed(cfg.seed, {kMaskStream, cfg.mask_spec.seed, static_cast<std::uint64_t>(step)}));
  return sample_mask(cfg.mask_spec, cfg.resolution, cfg.resolution, rng);
}

ImageBatch step_batch(const Dataset& train_set, const TrainingConfig& cfg, long step) {
  const long n = train_set.count();
  if (n < 1) fail(ErrorCategory::empty_input, "training set is empty");
  const long bs = std::min<long>(cfg.batch_size, n);
  const long per_epoch = (n + bs - 1) / bs;
  const long epoch = (step - 1) / per_epoch;
  const long index = (step - 1) % per_epoch;
  const auto order = shuffled_indices(static_cast<int>(n),
                                      derive_seed(cfg.seed, {kEpochStream, static_cast<std::uint64_t>(epoch)}));
  const long first = index * bs;
  const long last = std::min(n, first + bs);
  return train_set.gather(std::vector<int>(order.begin() + first, order.begin() + last));
}

LossReport train_step_with_mask(TrainingState& state, const ImageBatch& batch, const Mask& mask) {
  const TrainingConfig& cfg = state.config;
  const Shape s = batch.data.shape();
  if (s.c != 3 || s.h != cfg.resolution || s.w != cfg.resolution) {
    fail(ErrorCategory::shape_mismatch, "batch " + s.str() + " does not match training resolution " +
                                            std::to_string(cfg.resolution));
  }
  const TrainingState backup = state;
  auto abort_step = [&](const std::string& term) {
    state = backup;
    fail(ErrorCategory::non_finite, "non-finite " + term + " at step " + std::to_string(backup.step + 1) +
                                        "; parameters restored");
  };

  ModelBundle<float>& b = state.bundle;
  const CycleOptions opt = cfg.cycle_options();
  const CyclePair<float> cycles = run_cycles(b, batch.data, mask.grid, cfg.weights, opt);

  // D step: real images against both cycles' composites.
  ParameterSet<float> grads_D = b.discriminator.params().zeros_like();
  double disc_loss = 0.0;
  try {
    disc_loss = discriminator_gradients(b, batch.data, fake_pool(cycles), grads_D);
  } catch (const Error& e) {
    if (e.category() == ErrorCategory::non_finite) abort_step("disc_loss");
    throw;
  }
  adam_update(b.discriminator.params(), grads_D, state.opt_D, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2);
  if (!params_finite(b.discriminator.params())) abort_step("discriminator parameters");

  // Generators descend both cycle losses with D frozen.
  ParameterSet<float> grads_C = b.completion.params().zeros_like();
  ParameterSet<float> grads_E = b.extrapolation.params().zeros_like();
  ObjectiveTerms terms;
  try {
    terms = generator_gradients(b, cycles, cfg.weights, opt, &grads_C, &grads_E, static_cast<ParameterSet<float>*>(nullptr));
  } catch (const Error& e) {
    if (e.category() == ErrorCategory::non_finite) abort_step("generator adversarial loss");
    throw;
  }
  const LossReport report = make_report(terms, disc_loss, cfg.weights);
  if (const std::string bad = report.first_non_finite(); !bad.empty()) abort_step(bad);

  adam_update(b.completion.params(), grads_C, state.opt_C, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2);
  adam_update(b.extrapolation.params(), grads_E, state.opt_E, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2);
  if (!params_finite(b.completion.params())) abort_step("completion parameters");
  if (!params_finite(b.extrapolation.params())) abort_step("extrapolation parameters");

  state.step += 1;
  return report;
}

LossReport train_step(TrainingState& state, const ImageBatch& batch, Rng& rng) {
  const Mask mask = sample_mask(state.config.mask_spec, state.config.resolution, state.config.resolution, rng);
  return train_step_with_mask(state, batch, mask);
}

std::string checkpoint_name(long step) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "step_%08ld.ckpt", step);
  return buf;
}

std::pair<Dataset, Dataset> training_splits(const TrainingConfig& cfg) {
  return open_dataset(cfg.data, cfg.resolution).split_by(cfg.split_ratio, cfg.seed);
}

std::string train(const TrainingConfig& cfg, const Dataset& train_set, const std::string& out_dir,
                  const TrainOptions& options) {
  cfg.validate();
  if (train_set.resolution() != cfg.resolution) {
    fail(ErrorCategory::shape_mismatch, "dataset resolution " + std::to_string(train_set.resolution()) +
                                            " does not match config resolution " + std::to_string(cfg.resolution));
  }
  const fs::path out(out_dir);
  const fs::path ckpt_dir = out / "checkpoints";
  std::error_code ec;
  fs::create_directories(ckpt_dir, ec);
  if (ec) fail(ErrorCategory::io, "cannot create " + ckpt_dir.string() + ": " + ec.message());

  TrainingState state;
  if (options.resume_from.empty()) {
    state = init_training(cfg);
  } else {
    state = load_checkpoint(options.resume_from);
    const auto diff = config_diff(state.config, cfg, true);
    if (!diff.empty()) {
      std::string msg = "resume config differs from checkpoint:";
      for (const auto& d : diff) msg += "\n  " + d;
      fail(ErrorCategory::config, msg);
    }
    state.config = cfg;
  }

  {
    std::ofstream echo(out / "config.cfg", std::ios::trunc);
    echo << cfg.to_text();
    if (!echo) fail(ErrorCategory::io, "cannot write " + (out / "config.cfg").string());
  }

  // Keep log records up to the resume point, then append.
  const fs::path log_path = out / "train_log.jsonl";
  std::vector<std::string> kept;
  if (state.step > 0) {
    std::ifstream old(log_path);
    std::string line;
    while (std::getline(old, line)) {
      if (line.empty()) continue;
      long step = 0;
      LossReport::from_log_line(line, &step);
      if (step <= state.step) kept.push_back(line);
    }
  }
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) fail(ErrorCategory::io, "cannot open training log " + log_path.string());
  for (const auto& line : kept) log << line << "\n";
  log.flush();

  std::string last_ckpt;
  try {
    while (state.step < cfg.total_steps) {
      const long step = state.step + 1;
      const ImageBatch batch = step_batch(train_set, cfg, step);
      const LossReport report = train_step_with_mask(state, batch, step_mask(cfg, step));
      if ((step - 1) % cfg.log_every == 0) {
        log << report.to_log_line(step) << "\n";
        log.flush();
        if (!log) fail(ErrorCategory::io, "write to training log failed at step " + std::to_string(step));
      }
      if (options.on_step) options.on_step(step, report);
      if (step % cfg.checkpoint_every == 0 || step == cfg.total_steps) {
        last_ckpt = (ckpt_dir / checkpoint_name(step)).string();
        save_checkpoint(state, last_ckpt);
      }
    }
  } catch (...) {
    log.flush();
    throw;
  }
  if (last_ckpt.empty()) {
    // Resumed at or past total_steps: the existing state is final.
    last_ckpt = (ckpt_dir / checkpoint_name(state.step)).string();
    save_checkpoint(state, last_ckpt);
  }
  return last_ckpt;
}

#define CYCPAINT_INSTANTIATE(T)                                                                        \
  template CyclePair<T> run_cycles(const ModelBundle<T>&, const Tensor<T>&, const BinaryMap&,        \
                                   const LossWeights&, const CycleOptions&);                         \
  template Tensor<T> fake_pool(const CyclePair<T>&);                                                 \
  template double discriminator_gradients(const ModelBundle<T>&, const Tensor<T>&, const Tensor<T>&, \
                                          ParameterSet<T>&);                                         \
  template ObjectiveTerms generator_gradients(const ModelBundle<T>&, const CyclePair<T>&,            \
                                              const LossWeights&, const CycleOptions&,               \
                                              ParameterSet<T>*, ParameterSet<T>*, ParameterSet<T>*);

CYCPAINT_INSTANTIATE(float)
CYCPAINT_INSTANTIATE(double)

}  // namespace cycpaint
