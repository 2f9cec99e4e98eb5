// SPDX-License-Identifier: Apache-2.0
//
// Training configuration and its line-oriented text form:
//
//   # comment
//   key = value
//
// Keys mirror the field names below. Unknown keys are rejected.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cycpaint/losses.hpp"
#include "cycpaint/masking.hpp"
#include "cycpaint/networks.hpp"

namespace cycpaint {

struct TrainingConfig {
  int resolution = 64;
  int batch_size = 8;
  long total_steps = 2000;
  double learning_rate = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  LossWeights weights;
  MaskSpec mask_spec;
  std::uint64_t seed = 0;
  long checkpoint_every = 500;
  long log_every = 10;
  bool include_E_adv_in_forward = false;
  bool use_cycle_loss = true;

  int gen_base_channels = 8;
  int gen_downsample_stages = 2;
  std::vector<int> gen_dilations{2, 4, 8};
  int gen_edge_kernel = 5;
  int disc_base_channels = 8;
  int disc_downsample_stages = 4;

  std::string data = "synth:checkers:64";
  double split_ratio = 0.8;
  std::string out_dir = "run";

  /// Also checks that the generator's middle receptive field covers the
  /// largest mask side at this resolution.
  void validate() const;

  GeneratorConfig generator() const;
  DiscriminatorConfig discriminator() const;
  CycleOptions cycle_options() const { return {use_cycle_loss, include_E_adv_in_forward}; }

  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  /// Applies "key=value".
  void apply_override(const std::string& assignment);

  std::string to_text() const;
  static TrainingConfig from_text(const std::string& text);
  static TrainingConfig from_file(const std::string& path);

  static const std::vector<std::string>& keys();

  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

/// Keys that may differ between a checkpoint and a resumed run without
/// changing the step-by-step trajectory.
bool is_schedule_only_key(const std::string& key);

/// "key: a -> b" for every differing key; schedule-only keys are skipped
/// when `trajectory_only` is set.
std::vector<std::string> config_diff(const TrainingConfig& a, const TrainingConfig& b,
                                     bool trajectory_only);

}  // namespace cycpaint
