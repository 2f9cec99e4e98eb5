// SPDX-License-Identifier: Apache-2.0
//
// Inference with restoration of known pixels, PSNR scoring and result grids.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cycpaint/data.hpp"
#include "cycpaint/masking.hpp"
#include "cycpaint/networks.hpp"

namespace cycpaint {

/// PSNR reported for identical images.
inline constexpr double kPsnrCap = 100.0;

/// Maps a generator input (N x 4 x R x R) to its output (N x 3 x R x R).
using GeneratorFn = std::function<Tensor<float>(const Tensor<float>&)>;

GeneratorFn as_generator(const Network<float>& net);

/// Values in [-1, 1] are mapped to [0, 1]; 10 log10(1 / MSE), capped.
double psnr(const Tensor<float>& a, const Tensor<float>& b);

struct Restoration {
  Tensor<float> input;  // the masked image shown to the generator
  Tensor<float> raw;
  Tensor<float> restored;
};

/// raw = C(concat((1 - M) x, M)); restored keeps x where M = 0.
Restoration run_inpaint(const GeneratorFn& C, const Tensor<float>& x, const BinaryMap& M);
Restoration run_inpaint(const ModelBundle<float>& bundle, const Tensor<float>& x, const BinaryMap& M);

/// raw = E(concat(M x, 1 - M)); restored keeps x where M = 1.
Restoration run_outpaint(const GeneratorFn& E, const Tensor<float>& x, const BinaryMap& M);
Restoration run_outpaint(const ModelBundle<float>& bundle, const Tensor<float>& x, const BinaryMap& M);

enum class Direction { inpaint, outpaint };

std::string direction_name(Direction d);

struct PsnrEntry {
  std::string source_id;
  Direction direction = Direction::inpaint;
  double psnr = 0.0;
};

struct MetricsReport {
  std::vector<PsnrEntry> per_image;
  double mean_psnr = 0.0;
  double mean_inpaint = 0.0;
  double mean_outpaint = 0.0;
  std::uint64_t mask_seed = 0;

  /// One JSON record per entry, then a summary record.
  std::string to_jsonl() const;
  void write(const std::string& path) const;
};

/// Mask used for one test image; depends only on (seed, source id).
Mask evaluation_mask(const MaskSpec& spec, int resolution, std::uint64_t seed, const std::string& source_id);

/// Scores restored outputs in both directions for every image of `testset`.
MetricsReport evaluate(const GeneratorFn& C, const GeneratorFn& E, const Dataset& testset, const MaskSpec& spec,
                       std::uint64_t seed);
MetricsReport evaluate(const ModelBundle<float>& bundle, const Dataset& testset, const MaskSpec& spec,
                       std::uint64_t seed);

struct GridRow {
  Tensor<float> masked;
  Tensor<float> raw;
  Tensor<float> restored;
  Tensor<float> truth;
};

/// One PNG with a row of four tiles per entry (masked input, raw, restored,
/// ground truth), separated by `gutter` white pixels.
void render_grid(const std::vector<GridRow>& rows, const std::string& path, int gutter = 0);

}  // namespace cycpaint
