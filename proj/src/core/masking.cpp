// SPDX-License-Identifier: Apache-2.0

#include "cycpaint/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cycpaint {

namespace {

void require_map_shape(const Shape& s, const BinaryMap& m, const char* what) {
  if (s.h != m.height || s.w != m.width) {
    std::ostringstream os;
    os << what << ": image spatial size " << s.h << "x" << s.w << " does not match mask "
       << m.height << "x" << m.width;
    fail(ErrorCategory::shape_mismatch, os.str());
  }
}

// out = cell == keep ? x : 0
template <class T>
Tensor<T> select_where(const Tensor<T>& x, const BinaryMap& m, std::uint8_t keep, const char* what) {
  require_map_shape(x.shape(), m, what);
  Tensor<T> out(x.shape());
  const std::size_t plane = x.shape().plane();
  const std::size_t planes = static_cast<std::size_t>(x.shape().n) * x.shape().c;
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = x.data() + p * plane;
    T* dst = out.data() + p * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = m.cells[i] == keep ? src[i] : T(0);
  }
  return out;
}

}  // namespace

std::size_t BinaryMap::ones() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

void MaskSpec::validate() const {
  if (!(min_fraction > 0.0 && min_fraction <= max_fraction && max_fraction < 1.0)) {
    std::ostringstream os;
    os << "mask fractions must satisfy 0 < min_fraction <= max_fraction < 1, got ["
       << min_fraction << ", " << max_fraction << "]";
    fail(ErrorCategory::config, os.str());
  }
}

std::pair<int, int> feasible_sides(const MaskSpec& spec, int height, int width) {
  spec.validate();
  const double area = static_cast<double>(height) * width;
  const int max_side = std::min(height, width) - 2;
  int lo = 0, hi = 0;
  for (int s = 1; s <= max_side; ++s) {
    const double f = static_cast<double>(s) * s / area;
    if (f >= spec.min_fraction && f <= spec.max_fraction) {
      if (lo == 0) lo = s;
      hi = s;
    }
  }
  if (lo == 0) {
    std::ostringstream os;
    os << "no square side fits a " << height << "x" << width << " image with a 1-pixel border";
    if (max_side >= 1) {
      os << " and area fraction in [" << spec.min_fraction << ", " << spec.max_fraction
         << "] (largest bordered side " << max_side << " covers "
         << static_cast<double>(max_side) * max_side / area << ")";
    } else {
      os << " (image smaller than 3 pixels on a side)";
    }
    fail(ErrorCategory::geometry, os.str());
  }
  return {lo, hi};
}

Mask make_square_mask(int height, int width, SquareRegion region) {
  if (region.side < 1 || region.top < 0 || region.left < 0 || region.top + region.side > height ||
      region.left + region.side > width) {
    fail(ErrorCategory::geometry, "square region lies outside the image");
  }
  Mask m{BinaryMap(height, width, 0), region};
  for (int y = region.top; y < region.top + region.side; ++y) {
    for (int x = region.left; x < region.left + region.side; ++x) m.grid.at(y, x) = 1;
  }
  return m;
}

Mask sample_mask(const MaskSpec& spec, int height, int width, Rng& rng) {
  const auto [lo, hi] = feasible_sides(spec, height, width);
  const double f = rng.uniform(spec.min_fraction, spec.max_fraction);
  const int side = std::clamp(static_cast<int>(std::lround(std::sqrt(f * height * width))), lo, hi);
  const int top = static_cast<int>(rng.uniform_int(1, height - 1 - side));
  const int left = static_cast<int>(rng.uniform_int(1, width - 1 - side));
  return make_square_mask(height, width, {top, left, side});
}

std::string check_mask(const Mask& mask, const MaskSpec& spec) {
  const BinaryMap& g = mask.grid;
  if (g.cells.size() != static_cast<std::size_t>(g.height) * g.width) return "grid size mismatch";
  for (auto c : g.cells) {
    if (c != 0 && c != 1) return "non-binary cell";
  }
  const SquareRegion& r = mask.region;
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const bool inside = y >= r.top && y < r.top + r.side && x >= r.left && x < r.left + r.side;
      if (g.at(y, x) != (inside ? 1 : 0)) return "ones are not exactly the declared square";
    }
  }
  if (r.side < 1) return "empty square";
  if (r.top < 1 || r.left < 1 || r.top + r.side > g.height - 1 || r.left + r.side > g.width - 1) {
    return "square touches the image boundary";
  }
  const double f = static_cast<double>(r.side) * r.side / (static_cast<double>(g.height) * g.width);
  if (f < spec.min_fraction || f > spec.max_fraction) return "area fraction outside spec range";
  return {};
}

BinaryMap complement(const BinaryMap& m) {
  BinaryMap out(m.height, m.width);
  for (std::size_t i = 0; i < m.cells.size(); ++i) out.cells[i] = m.cells[i] ? 0 : 1;
  return out;
}

template <class T>
Tensor<T> inside_masked(const Tensor<T>& x, const BinaryMap& m) {
  return select_where(x, m, 0, "inside_masked");
}

template <class T>
Tensor<T> outside_masked(const Tensor<T>& x, const BinaryMap& m) {
  return select_where(x, m, 1, "outside_masked");
}

template <class T>
Tensor<T> concat_mask_channel(const Tensor<T>& masked, const BinaryMap& region) {
  require_map_shape(masked.shape(), region, "concat_mask_channel");
  const Shape s = masked.shape();
  Tensor<T> out({s.n, s.c + 1, s.h, s.w});
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    std::copy_n(masked.plane(n, 0), plane * s.c, out.plane(n, 0));
    T* dst = out.plane(n, s.c);
    for (std::size_t i = 0; i < plane; ++i) dst[i] = static_cast<T>(region.cells[i]);
  }
  return out;
}

template <class T>
Tensor<T> restore_known(const Tensor<T>& output, const Tensor<T>& input, const BinaryMap& known) {
  require_same_shape(output.shape(), input.shape(), "restore_known");
  require_map_shape(output.shape(), known, "restore_known");
  Tensor<T> out(output.shape());
  const std::size_t plane = output.shape().plane();
  const std::size_t planes = static_cast<std::size_t>(output.shape().n) * output.shape().c;
  for (std::size_t p = 0; p < planes; ++p) {
    const T* o = output.data() + p * plane;
    const T* in = input.data() + p * plane;
    T* dst = out.data() + p * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = known.cells[i] ? in[i] : o[i];
  }
  return out;
}

#define CYCPAINT_INSTANTIATE(T)                                                        \
  template Tensor<T> inside_masked(const Tensor<T>&, const BinaryMap&);                \
  template Tensor<T> outside_masked(const Tensor<T>&, const BinaryMap&);               \
  template Tensor<T> concat_mask_channel(const Tensor<T>&, const BinaryMap&);          \
  template Tensor<T> restore_known(const Tensor<T>&, const Tensor<T>&, const BinaryMap&);

CYCPAINT_INSTANTIATE(float)
CYCPAINT_INSTANTIATE(double)

}  // namespace cycpaint
