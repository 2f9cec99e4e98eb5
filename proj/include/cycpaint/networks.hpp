// SPDX-License-Identifier: Apache-2.0
//
// Completion network C, extrapolation network E and the global discriminator D.
//
// C and E share one generator layout: a strided encoder, residual middle blocks
// built from dilated convolutions, a nearest-upsampling decoder and a tanh
// output. D downsamples the whole image to a single logit.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cycpaint/layers.hpp"

namespace cycpaint {

/// Probabilities are clamped to [eps, 1 - eps] before any logarithm.
inline constexpr double kProbabilityEps = 1e-7;

struct GeneratorConfig {
  int base_channels = 8;
  int downsample_stages = 2;
  std::vector<int> dilated_blocks{2, 4, 8};
  int input_channels = 4;
  int output_channels = 3;
  int resolution = 64;
  int edge_kernel = 5;

  void validate() const;
  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

struct DiscriminatorConfig {
  int base_channels = 8;
  int downsample_stages = 4;
  int input_channels = 3;
  int resolution = 64;

  void validate() const;
  friend bool operator==(const DiscriminatorConfig&, const DiscriminatorConfig&) = default;
};

/// Receptive field, in input pixels, of one unit at the output of the last
/// dilated middle block.
int middle_receptive_field(const GeneratorConfig& cfg);

/// An immutable architecture plus its parameter values. Copies share the
/// architecture and deep-copy the parameters.
template <class T>
class Network {
 public:
  Network() = default;
  Network(std::shared_ptr<const Sequential<T>> arch, ParameterSet<T> params, Shape input_chw)
      : arch_(std::move(arch)), params_(std::move(params)), input_(input_chw) {}

  Tensor<T> forward(const Tensor<T>& in, LayerCache<T>* trace = nullptr) const;
  Tensor<T> backward(const LayerCache<T>& trace, const Tensor<T>& grad_out, ParameterSet<T>* grads,
                     bool need_input_grad) const;

  ParameterSet<T>& params() noexcept { return params_; }
  const ParameterSet<T>& params() const noexcept { return params_; }
  const Sequential<T>& arch() const { return *arch_; }

  // Expected input as {0, channels, height, width}.
  const Shape& input_shape() const noexcept { return input_; }

 private:
  std::shared_ptr<const Sequential<T>> arch_;
  ParameterSet<T> params_;
  Shape input_{};
};

/// Parameters are drawn from N(0, 0.02^2); biases start at zero.
template <class T>
Network<T> build_generator(const GeneratorConfig& cfg, const std::string& prefix, Rng& rng);

template <class T>
Network<T> build_discriminator(const DiscriminatorConfig& cfg, const std::string& prefix, Rng& rng);

template <class T>
struct ModelBundle {
  GeneratorConfig generator_config;
  DiscriminatorConfig discriminator_config;
  Network<T> completion;     // C
  Network<T> extrapolation;  // E
  Network<T> discriminator;  // D
};

template <class T>
ModelBundle<T> make_bundle(const GeneratorConfig& gen, const DiscriminatorConfig& disc,
                           std::uint64_t seed);

/// C applied to concat((1 - M) ⊙ x, M).
template <class T>
Tensor<T> complete(const Network<T>& C, const Tensor<T>& x_masked_with_mask);

/// E applied to concat(M ⊙ x, 1 - M).
template <class T>
Tensor<T> extrapolate(const Network<T>& E, const Tensor<T>& x_outside_masked_with_complement);

/// One clamped probability per image.
template <class T>
std::vector<double> discriminate(const Network<T>& D, const Tensor<T>& x);

/// Raw logits, one per image, as an N x 1 x 1 x 1 tensor.
template <class T>
Tensor<T> discriminator_logits(const Network<T>& D, const Tensor<T>& x, LayerCache<T>* trace = nullptr);

double clamped_sigmoid(double logit);

}  // namespace cycpaint
