// SPDX-License-Identifier: Apache-2.0
//
// Layer primitives with hand-written backward passes.
//
// Layers are immutable descriptions; parameters live in a ParameterSet owned
// by the network and activations live in a caller-owned LayerCache, so one
// architecture can run several independent forward passes (the same generator
// appears in both cycles of a training step) and read-only inference is safe
// from many threads.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cycpaint/random.hpp"
#include "cycpaint/tensor.hpp"

namespace cycpaint {

template <class T>
class ParameterSet {
 public:
  int add(std::string name, Shape shape);
  int index_of(const std::string& name) const;  // -1 when absent

  std::size_t size() const noexcept { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor<T>& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor<T>& operator[](std::size_t i) const { return tensors_[i]; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t numel() const;

  // Same names and shapes, all zeros.
  ParameterSet zeros_like() const;
  void set_zero();

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> tensors_;
};

template <class T>
struct LayerCache {
  Shape input_shape{};
  std::vector<Tensor<T>> saved;
  std::vector<T> scalars;
  std::vector<LayerCache> children;
};

template <class T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Shape output_shape(const Shape& in) const = 0;

  // `cache` may be null for inference-only passes.
  virtual Tensor<T> forward(const ParameterSet<T>& params, const Tensor<T>& in,
                            LayerCache<T>* cache) const = 0;

  // Accumulates parameter gradients into `grads` when non-null. Returns the
  // input gradient, or an empty tensor when `need_input_grad` is false.
  virtual Tensor<T> backward(const ParameterSet<T>& params, const LayerCache<T>& cache,
                             const Tensor<T>& grad_out, ParameterSet<T>* grads,
                             bool need_input_grad) const = 0;

  virtual void init(ParameterSet<T>& /*params*/, Rng& /*rng*/) const {}

  // Receptive-field bookkeeping: {growth in input pixels, stride multiplier}.
  virtual void receptive_field(int& field, int& jump) const { (void)field, (void)jump; }
};

template <class T>
using LayerPtr = std::unique_ptr<Layer<T>>;

struct ConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int padding = 1;
  int dilation = 1;
};

/// 2-D convolution via im2col and a single batched GEMM.
template <class T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(ParameterSet<T>& params, const std::string& name, ConvSpec spec, double init_std);

  Shape output_shape(const Shape& in) const override;
  Tensor<T> forward(const ParameterSet<T>& params, const Tensor<T>& in,
                    LayerCache<T>* cache) const override;
  Tensor<T> backward(const ParameterSet<T>& params, const LayerCache<T>& cache,
                     const Tensor<T>& grad_out, ParameterSet<T>* grads,
                     bool need_input_grad) const override;
  void init(ParameterSet<T>& params, Rng& rng) const override;
  void receptive_field(int& field, int& jump) const override;

  const ConvSpec& spec() const noexcept { return spec_; }

 private:
  ConvSpec spec_;
  int weight_ = -1;
  int bias_ = -1;
  double init_std_;
};

/// Per-image, per-channel normalization without affine parameters.
template <class T>
class InstanceNorm final : public Layer<T> {
 public:
  explicit InstanceNorm(double eps = 1e-5) : eps_(eps) {}
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor<T> forward(const ParameterSet<T>& params, const Tensor<T>& in,
                    LayerCache<T>* cache) const override;
  Tensor<T> backward(const ParameterSet<T>& params, const LayerCache<T>& cache,
                     const Tensor<T>& grad_out, ParameterSet<T>* grads,
                     bool need_input_grad) const override;

 private:
  double eps_;
};

/// ReLU when slope is 0, leaky ReLU otherwise.
template <class T>
class LeakyRelu final : public Layer<T> {
 public:
  explicit LeakyRelu(double slope = 0.0) : slope_(static_cast<T>(slope)) {}
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor<T> forward(const ParameterSet<T>& params, const Tensor<T>& in,
                    LayerCache<T>* cache) const override;
  Tensor<T> backward(const ParameterSet<T>& params, const LayerCache<T>& cache,
                     const Tensor<T>& grad_out, ParameterSet<T>* grads,
                     bool need_input_grad) const override;

 private:
  T slope_;
};

template <class T>
class Tanh final : public Layer<T> {
 public:
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor<T> forward(const ParameterSet<T>& params, const Tensor<T>& in,
                    LayerCache<T>* cache) const override;
  Tensor<T> backward(const ParameterSet<T>& params, const LayerCache<T>& cache,
                     const Tensor<T>& grad_out, ParameterSet<T>* grads,
                     bool need_input_grad) const override;
};

/// Nearest-neighbour 2x upsampling.
template <class T>
class Upsample2x final : public Layer<T> {
 public:
  Shape output_shape(const Shape& in) const override { return {in.n, in.c, in.h * 2, in.w * 2}; }
  Tensor<T> forward(const ParameterSet<T>& params, const Tensor<T>& in,
                    LayerCache<T>* cache) const override;
  Tensor<T> backward(const ParameterSet<T>& params, const LayerCache<T>& cache,
                     const Tensor<T>& grad_out, ParameterSet<T>* grads,
                     bool need_input_grad) const override;
  void receptive_field(int& field, int& jump) const override;
};

template <class T>
class Sequential : public Layer<T> {
 public:
  void push(LayerPtr<T> layer) { layers_.push_back(std::move(layer)); }
  std::size_t size() const noexcept { return layers_.size(); }

  Shape output_shape(const Shape& in) const override;
  Tensor<T> forward(const ParameterSet<T>& params, const Tensor<T>& in,
                    LayerCache<T>* cache) const override;
  Tensor<T> backward(const ParameterSet<T>& params, const LayerCache<T>& cache,
                     const Tensor<T>& grad_out, ParameterSet<T>* grads,
                     bool need_input_grad) const override;
  void init(ParameterSet<T>& params, Rng& rng) const override;
  void receptive_field(int& field, int& jump) const override;

 private:
  std::vector<LayerPtr<T>> layers_;
};

/// out = x + body(x)
template <class T>
class Residual final : public Layer<T> {
 public:
  explicit Residual(std::unique_ptr<Sequential<T>> body) : body_(std::move(body)) {}
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor<T> forward(const ParameterSet<T>& params, const Tensor<T>& in,
                    LayerCache<T>* cache) const override;
  Tensor<T> backward(const ParameterSet<T>& params, const LayerCache<T>& cache,
                     const Tensor<T>& grad_out, ParameterSet<T>* grads,
                     bool need_input_grad) const override;
  void init(ParameterSet<T>& params, Rng& rng) const override { body_->init(params, rng); }
  void receptive_field(int& field, int& jump) const override { body_->receptive_field(field, jump); }

 private:
  std::unique_ptr<Sequential<T>> body_;
};

}  // namespace cycpaint
