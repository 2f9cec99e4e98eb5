// SPDX-License-Identifier: Apache-2.0

#include "cycpaint/tensor.hpp"

#include <cmath>
#include <sstream>

namespace cycpaint {

std::string Shape::str() const {
  std::ostringstream os;
  os << n << "x" << c << "x" << h << "x" << w;
  return os.str();
}

template <class T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    fail(ErrorCategory::shape_mismatch,
         "tensor data has " + std::to_string(data_.size()) + " elements, shape " + shape_.str() +
             " needs " + std::to_string(shape_.numel()));
  }
}

template <class T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  return Tensor(shape, data_);
}

template <class T>
Tensor<T> Tensor<T>::batch_slice(int first, int count) const {
  if (first < 0 || count < 0 || first + count > shape_.n) {
    fail(ErrorCategory::shape_mismatch, "batch slice out of range for shape " + shape_.str());
  }
  Shape s = shape_;
  s.n = count;
  const std::size_t per = static_cast<std::size_t>(shape_.c) * shape_.plane();
  std::vector<T> out(data_.begin() + static_cast<std::ptrdiff_t>(first * per),
                     data_.begin() + static_cast<std::ptrdiff_t>((first + count) * per));
  return Tensor(s, std::move(out));
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    fail(ErrorCategory::shape_mismatch,
         std::string(what) + ": shape " + a.str() + " does not match " + b.str());
  }
}

template <class T>
bool all_finite(const Tensor<T>& t) {
  for (T v : t.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <class T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  T* pa = a.data();
  const T* pb = b.data();
  for (std::size_t i = 0; i < a.numel(); ++i) pa[i] += pb[i];
}

template <class T>
Tensor<T> concat_batch(const Tensor<T>& a, const Tensor<T>& b) {
  Shape sa = a.shape(), sb = b.shape();
  sa.n = sb.n = 0;
  require_same_shape(sa, sb, "concat_batch");
  Shape s = a.shape();
  s.n += b.shape().n;
  std::vector<T> out;
  out.reserve(s.numel());
  out.insert(out.end(), a.storage().begin(), a.storage().end());
  out.insert(out.end(), b.storage().begin(), b.storage().end());
  return Tensor<T>(s, std::move(out));
}

#define CYCPAINT_INSTANTIATE(T)                                       \
  template class Tensor<T>;                                           \
  template bool all_finite(const Tensor<T>&);                         \
  template void add_inplace(Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> concat_batch(const Tensor<T>&, const Tensor<T>&);

CYCPAINT_INSTANTIATE(float)
CYCPAINT_INSTANTIATE(double)

}  // namespace cycpaint
