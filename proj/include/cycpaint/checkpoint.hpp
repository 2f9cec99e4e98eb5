// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container.
//
//   offset 0   8 bytes   magic "CYCPCKPT"
//   offset 8   u32 LE    format version (1)
//   offset 12  u64 LE    header length H
//   offset 20  H bytes   JSON header
//   offset 20+H          payload: float32 LE tensors, back to back
//
// The header holds the training step, the full training config (which
// determines both network configs), the optimizer step counts and a tensor
// directory: name, shape, payload offset, and an FNV-1a hash of the bytes.
// Tensor names are "C.*", "E.*", "D.*" for parameters and "adam.<net>.m.*",
// "adam.<net>.v.*" for optimizer moments.

#pragma once

#include <string>
#include <vector>

#include "cycpaint/training.hpp"

namespace cycpaint {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const TrainingState& state, const std::string& path);

/// Rebuilds the architecture from the stored config and fills every tensor.
/// Fails with a checkpoint error on truncation, corruption, unknown version,
/// or any name/shape mismatch.
TrainingState load_checkpoint(const std::string& path);

/// Loads into the architecture implied by `expected`; the first tensor whose
/// name or shape differs is named in the error.
TrainingState load_checkpoint(const std::string& path, const TrainingConfig& expected);

/// Tensor names in the order they are stored.
std::vector<std::string> checkpoint_tensor_names(const std::string& path);

/// Names a checkpoint of this config must contain.
std::vector<std::string> expected_tensor_names(const TrainingConfig& cfg);

}  // namespace cycpaint
