// SPDX-License-Identifier: Apache-2.0
//
// Binary hole masks and the mask algebra used by both cycles.
//
// Convention: a mask cell of 1 marks a pixel to synthesize, 0 a known pixel.
// The completion network sees the image with the 1-region removed; the
// extrapolation network sees only the 1-region.

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cycpaint/random.hpp"
#include "cycpaint/tensor.hpp"

namespace cycpaint {

/// Binary matrix broadcast over batch and channels. Cells are exactly 0 or 1.
struct BinaryMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> cells;

  BinaryMap() = default;
  BinaryMap(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), cells(static_cast<std::size_t>(h) * w, fill) {}

  std::uint8_t& at(int y, int x) { return cells[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return cells[static_cast<std::size_t>(y) * width + x]; }
  std::size_t ones() const;

  friend bool operator==(const BinaryMap&, const BinaryMap&) = default;
};

struct SquareRegion {
  int top = 0;
  int left = 0;
  int side = 0;

  friend bool operator==(const SquareRegion&, const SquareRegion&) = default;
};

struct Mask {
  BinaryMap grid;
  SquareRegion region;
};

struct MaskSpec {
  double min_fraction = 0.25;
  double max_fraction = 0.35;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const MaskSpec&, const MaskSpec&) = default;
};

/// Inclusive range of integer square sides that fit inside an h x w image with
/// a one-pixel zero border and whose area fraction lies in the spec's range.
/// Throws a geometry error when the range is empty.
std::pair<int, int> feasible_sides(const MaskSpec& spec, int height, int width);

Mask sample_mask(const MaskSpec& spec, int height, int width, Rng& rng);

/// Rasterize a square region.
Mask make_square_mask(int height, int width, SquareRegion region);

/// Checks every Mask invariant against the spec; returns an empty string when
/// valid, otherwise a description of the first violated invariant.
std::string check_mask(const Mask& mask, const MaskSpec& spec);

BinaryMap complement(const BinaryMap& m);

/// (1 - M) ⊙ x
template <class T>
Tensor<T> inside_masked(const Tensor<T>& x, const BinaryMap& m);

/// M ⊙ x
template <class T>
Tensor<T> outside_masked(const Tensor<T>& x, const BinaryMap& m);

/// Appends `region` as one extra channel to every image of the batch.
template <class T>
Tensor<T> concat_mask_channel(const Tensor<T>& masked, const BinaryMap& region);

/// known ⊙ input + (1 - known) ⊙ output, computed by selection so known
/// pixels are copied bit-exactly.
template <class T>
Tensor<T> restore_known(const Tensor<T>& output, const Tensor<T>& input, const BinaryMap& known);

}  // namespace cycpaint
