// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "cycpaint/masking.hpp"
#include "cycpaint/random.hpp"
#include "cycpaint/tensor.hpp"

namespace testutil {

template <class T>
cycpaint::Tensor<T> random_tensor(cycpaint::Shape s, cycpaint::Rng& rng, double lo = -1.0, double hi = 1.0) {
  cycpaint::Tensor<T> t(s);
  for (T& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Values with magnitude in [0.5, 1] and random sign.
template <class T>
cycpaint::Tensor<T> random_far_from_zero(cycpaint::Shape s, cycpaint::Rng& rng) {
  cycpaint::Tensor<T> t(s);
  for (T& v : t.values()) v = static_cast<T>((rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.0));
  return t;
}

// Pixels at exactly -1 or +1. A tanh output never reaches them, so L1 terms
// against such targets have no kinks.
template <class T>
cycpaint::Tensor<T> random_extreme(cycpaint::Shape s, cycpaint::Rng& rng) {
  cycpaint::Tensor<T> t(s);
  for (T& v : t.values()) v = rng.uniform() < 0.5 ? T(-1) : T(1);
  return t;
}

inline cycpaint::BinaryMap random_binary(int h, int w, cycpaint::Rng& rng) {
  cycpaint::BinaryMap m(h, w);
  for (auto& c : m.cells) c = rng.uniform() < 0.5 ? 1 : 0;
  return m;
}

// Random square with a one-pixel border (any side that fits).
inline cycpaint::Mask random_square(int h, int w, cycpaint::Rng& rng) {
  const int max_side = std::min(h, w) - 2;
  const int side = static_cast<int>(rng.uniform_int(1, max_side));
  const int top = static_cast<int>(rng.uniform_int(1, h - 1 - side));
  const int left = static_cast<int>(rng.uniform_int(1, w - 1 - side));
  return cycpaint::make_square_mask(h, w, {top, left, side});
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("cycpaint_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testutil
