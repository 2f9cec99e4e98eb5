// SPDX-License-Identifier: Apache-2.0

#include "cycpaint/layers.hpp"

#include <Eigen/Core>
#include <cmath>
#include <sstream>

namespace cycpaint {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

int conv_out(int size, const ConvSpec& s) {
  return (size + 2 * s.padding - s.dilation * (s.kernel - 1) - 1) / s.stride + 1;
}

// cols is K x (N * OH * OW), K = C * k * k.
template <class T>
void im2col(const Tensor<T>& in, const ConvSpec& s, int oh, int ow, T* cols) {
  const Shape is = in.shape();
  const std::size_t np = static_cast<std::size_t>(is.n) * oh * ow;
  const int k = s.kernel;
  for (int ci = 0; ci < is.c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) * np;
        for (int n = 0; n < is.n; ++n) {
          const T* src = in.plane(n, ci);
          T* dst = row + static_cast<std::size_t>(n) * oh * ow;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * s.stride - s.padding + ky * s.dilation;
            T* drow = dst + static_cast<std::size_t>(oy) * ow;
            if (iy < 0 || iy >= is.h) {
              std::fill_n(drow, ow, T(0));
              continue;
            }
            const T* srow = src + static_cast<std::size_t>(iy) * is.w;
            const int x0 = -s.padding + kx * s.dilation;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * s.stride + x0;
              drow[ox] = (ix >= 0 && ix < is.w) ? srow[ix] : T(0);
            }
          }
        }
      }
    }
  }
}

template <class T>
void col2im(const T* cols, const ConvSpec& s, int oh, int ow, Tensor<T>& grad_in) {
  const Shape is = grad_in.shape();
  const std::size_t np = static_cast<std::size_t>(is.n) * oh * ow;
  const int k = s.kernel;
  for (int ci = 0; ci < is.c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) * np;
        for (int n = 0; n < is.n; ++n) {
          T* dst = grad_in.plane(n, ci);
          const T* src = row + static_cast<std::size_t>(n) * oh * ow;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * s.stride - s.padding + ky * s.dilation;
            if (iy < 0 || iy >= is.h) continue;
            T* drow = dst + static_cast<std::size_t>(iy) * is.w;
            const T* srow = src + static_cast<std::size_t>(oy) * ow;
            const int x0 = -s.padding + kx * s.dilation;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * s.stride + x0;
              if (ix >= 0 && ix < is.w) drow[ix] += srow[ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// ParameterSet

template <class T>
int ParameterSet<T>::add(std::string name, Shape shape) {
  if (index_of(name) >= 0) fail(ErrorCategory::internal, "duplicate parameter name " + name);
  names_.push_back(std::move(name));
  tensors_.emplace_back(shape);
  return static_cast<int>(tensors_.size()) - 1;
}

template <class T>
int ParameterSet<T>::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  return -1;
}

template <class T>
std::size_t ParameterSet<T>::numel() const {
  std::size_t total = 0;
  for (const auto& t : tensors_) total += t.numel();
  return total;
}

template <class T>
ParameterSet<T> ParameterSet<T>::zeros_like() const {
  ParameterSet out;
  out.names_ = names_;
  out.tensors_.reserve(tensors_.size());
  for (const auto& t : tensors_) out.tensors_.emplace_back(t.shape());
  return out;
}

template <class T>
void ParameterSet<T>::set_zero() {
  for (auto& t : tensors_) t.fill(T(0));
}

// ---------------------------------------------------------------------------
// Conv2d

template <class T>
Conv2d<T>::Conv2d(ParameterSet<T>& params, const std::string& name, ConvSpec spec, double init_std)
    : spec_(spec), init_std_(init_std) {
  weight_ = params.add(name + ".weight", {spec.out_channels, spec.in_channels, spec.kernel, spec.kernel});
  bias_ = params.add(name + ".bias", {1, spec.out_channels, 1, 1});
}

template <class T>
Shape Conv2d<T>::output_shape(const Shape& in) const {
  if (in.c != spec_.in_channels) {
    std::ostringstream os;
    os << "conv expects " << spec_.in_channels << " input channels, got " << in.c;
    fail(ErrorCategory::shape_mismatch, os.str());
  }
  const Shape out{in.n, spec_.out_channels, conv_out(in.h, spec_), conv_out(in.w, spec_)};
  if (out.h < 1 || out.w < 1) {
    fail(ErrorCategory::shape_mismatch, "input " + in.str() + " too small for convolution");
  }
  return out;
}

template <class T>
Tensor<T> Conv2d<T>::forward(const ParameterSet<T>& params, const Tensor<T>& in,
                             LayerCache<T>* cache) const {
  const Shape os = output_shape(in.shape());
  const int k2 = spec_.in_channels * spec_.kernel * spec_.kernel;
  const std::size_t p = os.plane();
  const std::size_t np = static_cast<std::size_t>(os.n) * p;

  Tensor<T> cols({1, 1, k2, static_cast<int>(np)});
  im2col(in, spec_, os.h, os.w, cols.data());

  RowMat<T> result(spec_.out_channels, static_cast<Eigen::Index>(np));
  ConstMatMap<T> w(params[weight_].data(), spec_.out_channels, k2);
  ConstMatMap<T> c(cols.data(), k2, static_cast<Eigen::Index>(np));
  result.noalias() = w * c;

  Tensor<T> out(os);
  const T* b = params[bias_].data();
  for (int n = 0; n < os.n; ++n) {
    for (int co = 0; co < os.c; ++co) {
      const T* src = result.data() + static_cast<std::size_t>(co) * np + n * p;
      T* dst = out.plane(n, co);
      const T bias = b[co];
      for (std::size_t i = 0; i < p; ++i) dst[i] = src[i] + bias;
    }
  }
  if (cache) {
    cache->input_shape = in.shape();
    cache->saved.push_back(std::move(cols));
  }
  return out;
}

template <class T>
Tensor<T> Conv2d<T>::backward(const ParameterSet<T>& params, const LayerCache<T>& cache,
                              const Tensor<T>& grad_out, ParameterSet<T>* grads,
                              bool need_input_grad) const {
  const Shape os = grad_out.shape();
  const int k2 = spec_.in_channels * spec_.kernel * spec_.kernel;
  const std::size_t p = os.plane();
  const std::size_t np = static_cast<std::size_t>(os.n) * p;

  RowMat<T> g(os.c, static_cast<Eigen::Index>(np));
  for (int n = 0; n < os.n; ++n) {
    for (int co = 0; co < os.c; ++co) {
      std::copy_n(grad_out.plane(n, co), p, g.data() + static_cast<std::size_t>(co) * np + n * p);
    }
  }

  if (grads) {
    const Tensor<T>& cols = cache.saved.at(0);
    ConstMatMap<T> c(cols.data(), k2, static_cast<Eigen::Index>(np));
    MatMap<T> dw((*grads)[weight_].data(), spec_.out_channels, k2);
    dw.noalias() += g * c.transpose();
    T* db = (*grads)[bias_].data();
    for (int co = 0; co < os.c; ++co) db[co] += g.row(co).sum();
  }
  if (!need_input_grad) return {};

  RowMat<T> dcols(k2, static_cast<Eigen::Index>(np));
  ConstMatMap<T> w(params[weight_].data(), spec_.out_channels, k2);
  dcols.noalias() = w.transpose() * g;
  Tensor<T> grad_in(cache.input_shape);
  col2im(dcols.data(), spec_, os.h, os.w, grad_in);
  return grad_in;
}

template <class T>
void Conv2d<T>::init(ParameterSet<T>& params, Rng& rng) const {
  for (T& v : params[weight_].values()) v = static_cast<T>(rng.normal() * init_std_);
  params[bias_].fill(T(0));
}

template <class T>
void Conv2d<T>::receptive_field(int& field, int& jump) const {
  field += spec_.dilation * (spec_.kernel - 1) * jump;
  jump *= spec_.stride;
}

// ---------------------------------------------------------------------------
// InstanceNorm

template <class T>
Tensor<T> InstanceNorm<T>::forward(const ParameterSet<T>&, const Tensor<T>& in,
                                   LayerCache<T>* cache) const {
  const Shape s = in.shape();
  const std::size_t p = s.plane();
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  Tensor<T> out(s);
  std::vector<T> inv_std(planes);
  for (std::size_t q = 0; q < planes; ++q) {
    const T* x = in.data() + q * p;
    T* y = out.data() + q * p;
    double mean = 0.0;
    for (std::size_t i = 0; i < p; ++i) mean += x[i];
    mean /= static_cast<double>(p);
    double var = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      const double d = x[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(p);
    const double is = 1.0 / std::sqrt(var + eps_);
    for (std::size_t i = 0; i < p; ++i) y[i] = static_cast<T>((x[i] - mean) * is);
    inv_std[q] = static_cast<T>(is);
  }
  if (cache) {
    cache->input_shape = s;
    cache->saved.push_back(out);
    cache->scalars = std::move(inv_std);
  }
  return out;
}

template <class T>
Tensor<T> InstanceNorm<T>::backward(const ParameterSet<T>&, const LayerCache<T>& cache,
                                    const Tensor<T>& grad_out, ParameterSet<T>*,
                                    bool need_input_grad) const {
  if (!need_input_grad) return {};
  const Shape s = grad_out.shape();
  const std::size_t p = s.plane();
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  const Tensor<T>& out = cache.saved.at(0);
  Tensor<T> grad_in(s);
  for (std::size_t q = 0; q < planes; ++q) {
    const T* g = grad_out.data() + q * p;
    const T* y = out.data() + q * p;
    T* dx = grad_in.data() + q * p;
    double mg = 0.0, mgy = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      mg += g[i];
      mgy += static_cast<double>(g[i]) * y[i];
    }
    mg /= static_cast<double>(p);
    mgy /= static_cast<double>(p);
    const double is = cache.scalars[q];
    for (std::size_t i = 0; i < p; ++i) dx[i] = static_cast<T>(is * (g[i] - mg - y[i] * mgy));
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Pointwise

template <class T>
Tensor<T> LeakyRelu<T>::forward(const ParameterSet<T>&, const Tensor<T>& in,
                                LayerCache<T>* cache) const {
  Tensor<T> out(in.shape());
  for (std::size_t i = 0; i < in.numel(); ++i) out[i] = in[i] > T(0) ? in[i] : slope_ * in[i];
  if (cache) {
    cache->input_shape = in.shape();
    cache->saved.push_back(in);
  }
  return out;
}

template <class T>
Tensor<T> LeakyRelu<T>::backward(const ParameterSet<T>&, const LayerCache<T>& cache,
                                 const Tensor<T>& grad_out, ParameterSet<T>*,
                                 bool need_input_grad) const {
  if (!need_input_grad) return {};
  const Tensor<T>& in = cache.saved.at(0);
  Tensor<T> grad_in(in.shape());
  for (std::size_t i = 0; i < in.numel(); ++i) {
    grad_in[i] = in[i] > T(0) ? grad_out[i] : slope_ * grad_out[i];
  }
  return grad_in;
}

template <class T>
Tensor<T> Tanh<T>::forward(const ParameterSet<T>&, const Tensor<T>& in, LayerCache<T>* cache) const {
  Tensor<T> out(in.shape());
  for (std::size_t i = 0; i < in.numel(); ++i) out[i] = std::tanh(in[i]);
  if (cache) {
    cache->input_shape = in.shape();
    cache->saved.push_back(out);
  }
  return out;
}

template <class T>
Tensor<T> Tanh<T>::backward(const ParameterSet<T>&, const LayerCache<T>& cache,
                            const Tensor<T>& grad_out, ParameterSet<T>*,
                            bool need_input_grad) const {
  if (!need_input_grad) return {};
  const Tensor<T>& y = cache.saved.at(0);
  Tensor<T> grad_in(y.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) grad_in[i] = grad_out[i] * (T(1) - y[i] * y[i]);
  return grad_in;
}

template <class T>
Tensor<T> Upsample2x<T>::forward(const ParameterSet<T>&, const Tensor<T>& in,
                                 LayerCache<T>* cache) const {
  const Shape s = in.shape();
  Tensor<T> out(output_shape(s));
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const T* src = in.plane(n, c);
      T* dst = out.plane(n, c);
      const int ow = s.w * 2;
      for (int y = 0; y < s.h; ++y) {
        T* r0 = dst + static_cast<std::size_t>(2 * y) * ow;
        T* r1 = r0 + ow;
        for (int x = 0; x < s.w; ++x) {
          const T v = src[static_cast<std::size_t>(y) * s.w + x];
          r0[2 * x] = r0[2 * x + 1] = r1[2 * x] = r1[2 * x + 1] = v;
        }
      }
    }
  }
  if (cache) cache->input_shape = s;
  return out;
}

template <class T>
Tensor<T> Upsample2x<T>::backward(const ParameterSet<T>&, const LayerCache<T>& cache,
                                  const Tensor<T>& grad_out, ParameterSet<T>*,
                                  bool need_input_grad) const {
  if (!need_input_grad) return {};
  const Shape s = cache.input_shape;
  Tensor<T> grad_in(s);
  const int ow = s.w * 2;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const T* src = grad_out.plane(n, c);
      T* dst = grad_in.plane(n, c);
      for (int y = 0; y < s.h; ++y) {
        const T* r0 = src + static_cast<std::size_t>(2 * y) * ow;
        const T* r1 = r0 + ow;
        for (int x = 0; x < s.w; ++x) {
          dst[static_cast<std::size_t>(y) * s.w + x] = r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1];
        }
      }
    }
  }
  return grad_in;
}

template <class T>
void Upsample2x<T>::receptive_field(int& /*field*/, int& jump) const {
  jump = std::max(1, jump / 2);
}

// ---------------------------------------------------------------------------
// Containers

template <class T>
Shape Sequential<T>::output_shape(const Shape& in) const {
  Shape s = in;
  for (const auto& l : layers_) s = l->output_shape(s);
  return s;
}

template <class T>
Tensor<T> Sequential<T>::forward(const ParameterSet<T>& params, const Tensor<T>& in,
                                 LayerCache<T>* cache) const {
  if (cache) {
    cache->input_shape = in.shape();
    cache->children.assign(layers_.size(), {});
  }
  Tensor<T> x = in;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i]->forward(params, x, cache ? &cache->children[i] : nullptr);
  }
  return x;
}

template <class T>
Tensor<T> Sequential<T>::backward(const ParameterSet<T>& params, const LayerCache<T>& cache,
                                  const Tensor<T>& grad_out, ParameterSet<T>* grads,
                                  bool need_input_grad) const {
  Tensor<T> g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const bool need = need_input_grad || i > 0;
    g = layers_[i]->backward(params, cache.children.at(i), g, grads, need);
  }
  return g;
}

template <class T>
void Sequential<T>::init(ParameterSet<T>& params, Rng& rng) const {
  for (const auto& l : layers_) l->init(params, rng);
}

template <class T>
void Sequential<T>::receptive_field(int& field, int& jump) const {
  for (const auto& l : layers_) l->receptive_field(field, jump);
}

template <class T>
Tensor<T> Residual<T>::forward(const ParameterSet<T>& params, const Tensor<T>& in,
                               LayerCache<T>* cache) const {
  if (cache) {
    cache->input_shape = in.shape();
    cache->children.assign(1, {});
  }
  Tensor<T> out = body_->forward(params, in, cache ? &cache->children[0] : nullptr);
  add_inplace(out, in);
  return out;
}

template <class T>
Tensor<T> Residual<T>::backward(const ParameterSet<T>& params, const LayerCache<T>& cache,
                                const Tensor<T>& grad_out, ParameterSet<T>* grads,
                                bool need_input_grad) const {
  Tensor<T> g = body_->backward(params, cache.children.at(0), grad_out, grads, need_input_grad);
  if (!need_input_grad) return {};
  add_inplace(g, grad_out);
  return g;
}

#define CYCPAINT_INSTANTIATE(T)   \
  template class ParameterSet<T>; \
  template class Conv2d<T>;       \
  template class InstanceNorm<T>; \
  template class LeakyRelu<T>;    \
  template class Tanh<T>;         \
  template class Upsample2x<T>;   \
  template class Sequential<T>;   \
  template class Residual<T>;

CYCPAINT_INSTANTIATE(float)
CYCPAINT_INSTANTIATE(double)

}  // namespace cycpaint
