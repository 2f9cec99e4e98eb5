// SPDX-License-Identifier: Apache-2.0
//
// Joint optimization of C, E and D: per step one shared mask, one
// discriminator update on real images against the composited outputs of both
// cycles, then one joint C+E update on the sum of both cycle losses with D
// frozen.
//
// Every random draw is derived from (seed, step), so a run resumed from a
// checkpoint continues bit-identically.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cycpaint/config.hpp"
#include "cycpaint/data.hpp"
#include "cycpaint/losses.hpp"
#include "cycpaint/networks.hpp"

namespace cycpaint {

struct AdamState {
  ParameterSet<float> m;
  ParameterSet<float> v;
  long t = 0;

  static AdamState zeros_like(const ParameterSet<float>& params);
};

void adam_update(ParameterSet<float>& params, const ParameterSet<float>& grads, AdamState& state,
                 double lr, double beta1, double beta2, double eps = 1e-8);

struct TrainingState {
  TrainingConfig config;
  ModelBundle<float> bundle;
  AdamState opt_C;
  AdamState opt_E;
  AdamState opt_D;
  long step = 0;
};

/// Fresh, seeded parameters and zeroed optimizer moments.
TrainingState init_training(const TrainingConfig& cfg);

// --- step phases ------------------------------------------------------------

template <class T>
struct CyclePair {
  CycleTrace<T> forward;   // C then E, region M
  CycleTrace<T> backward;  // E then C, region 1 - M
};

template <class T>
CyclePair<T> run_cycles(const ModelBundle<T>& bundle, const Tensor<T>& x, const BinaryMap& M,
                        const LossWeights& w, const CycleOptions& opt);

/// Composited outputs of both cycles' first networks, pooled along the batch.
template <class T>
Tensor<T> fake_pool(const CyclePair<T>& cycles);

/// Gradient of the discriminator loss (real x vs the fake pool).
template <class T>
double discriminator_gradients(const ModelBundle<T>& bundle, const Tensor<T>& x, const Tensor<T>& fakes,
                               ParameterSet<T>& disc_grads);

struct ObjectiveTerms {
  CycleTerms forward;
  CycleTerms backward;
};

/// Back-propagates forward + backward cycle totals into C, E and (optionally)
/// D gradients, re-evaluating adversarial terms against the current D.
template <class T>
ObjectiveTerms generator_gradients(const ModelBundle<T>& bundle, const CyclePair<T>& cycles,
                                   const LossWeights& w, const CycleOptions& opt,
                                   ParameterSet<T>* grads_C, ParameterSet<T>* grads_E,
                                   ParameterSet<T>* grads_D);

LossReport make_report(const ObjectiveTerms& terms, double disc_loss, const LossWeights& w);

// --- steps and runs -----------------------------------------------------------

/// Mask for a given step of a run.
Mask step_mask(const TrainingConfig& cfg, long step);

/// Batch for a given step: epoch-wise shuffles seeded by (seed, epoch).
ImageBatch step_batch(const Dataset& train_set, const TrainingConfig& cfg, long step);

/// One optimization step with a freshly sampled mask drawn from `rng`.
/// On a non-finite loss or parameter, restores the pre-step state and throws
/// a non-finite error naming the term.
LossReport train_step(TrainingState& state, const ImageBatch& batch, Rng& rng);

/// Same as train_step with an explicit mask.
LossReport train_step_with_mask(TrainingState& state, const ImageBatch& batch, const Mask& mask);

struct TrainOptions {
  std::string resume_from;  // checkpoint path, empty for a fresh run
  std::function<void(long step, const LossReport&)> on_step;
};

/// Runs cfg.total_steps steps on `train_set`, writing into `out_dir`:
///   config.cfg          effective config
///   train_log.jsonl     one LossReport line per log interval
///   checkpoints/step_NNNNNNNN.ckpt
/// Returns the path of the final checkpoint.
std::string train(const TrainingConfig& cfg, const Dataset& train_set, const std::string& out_dir,
                  const TrainOptions& options = {});

/// Training split of cfg.data at cfg.resolution.
std::pair<Dataset, Dataset> training_splits(const TrainingConfig& cfg);

std::string checkpoint_name(long step);

}  // namespace cycpaint
