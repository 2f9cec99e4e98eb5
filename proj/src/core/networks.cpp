// SPDX-License-Identifier: Apache-2.0

#include "cycpaint/networks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cycpaint {

namespace {

constexpr double kInitStd = 0.02;

void config_error(const std::string& what) { fail(ErrorCategory::config, what); }

template <class T>
void push_conv(Sequential<T>& seq, ParameterSet<T>& params, const std::string& name, ConvSpec spec) {
  seq.push(std::make_unique<Conv2d<T>>(params, name, spec, kInitStd));
}

// Layers up to and including the dilated middle; shared by the builder and the
// receptive-field computation.
template <class T>
void append_encoder(Sequential<T>& seq, ParameterSet<T>& params, const GeneratorConfig& cfg,
                    const std::string& prefix) {
  const int pad = cfg.edge_kernel / 2;
  push_conv(seq, params, prefix + "stem", {cfg.input_channels, cfg.base_channels, cfg.edge_kernel, 1, pad, 1});
  seq.push(std::make_unique<InstanceNorm<T>>());
  seq.push(std::make_unique<LeakyRelu<T>>(0.0));
  int ch = cfg.base_channels;
  for (int i = 0; i < cfg.downsample_stages; ++i) {
    push_conv(seq, params, prefix + "down" + std::to_string(i), {ch, ch * 2, 3, 2, 1, 1});
    seq.push(std::make_unique<InstanceNorm<T>>());
    seq.push(std::make_unique<LeakyRelu<T>>(0.0));
    ch *= 2;
  }
  for (std::size_t j = 0; j < cfg.dilated_blocks.size(); ++j) {
    const int rate = cfg.dilated_blocks[j];
    const std::string name = prefix + "mid" + std::to_string(j);
    auto body = std::make_unique<Sequential<T>>();
    push_conv(*body, params, name + ".conv0", {ch, ch, 3, 1, rate, rate});
    body->push(std::make_unique<InstanceNorm<T>>());
    body->push(std::make_unique<LeakyRelu<T>>(0.0));
    push_conv(*body, params, name + ".conv1", {ch, ch, 3, 1, rate, rate});
    body->push(std::make_unique<InstanceNorm<T>>());
    seq.push(std::make_unique<Residual<T>>(std::move(body)));
  }
}

}  // namespace

void GeneratorConfig::validate() const {
  std::ostringstream os;
  if (base_channels < 1) os << "generator base_channels must be >= 1; ";
  if (downsample_stages < 0) os << "generator downsample_stages must be >= 0; ";
  if (input_channels < 1 || output_channels < 1) os << "generator channel counts must be >= 1; ";
  if (edge_kernel < 1 || edge_kernel % 2 == 0) os << "generator edge_kernel must be odd; ";
  for (std::size_t i = 0; i < dilated_blocks.size(); ++i) {
    if (dilated_blocks[i] < 1) os << "dilation rates must be >= 1; ";
    if (i > 0 && dilated_blocks[i] < dilated_blocks[i - 1]) os << "dilation rates must be nondecreasing; ";
  }
  if (resolution < 1 || downsample_stages > 20 || resolution % (1 << std::max(0, downsample_stages)) != 0) {
    os << "resolution " << resolution << " is not divisible by 2^" << downsample_stages << "; ";
  }
  if (!os.str().empty()) config_error(os.str().substr(0, os.str().size() - 2));
}

void DiscriminatorConfig::validate() const {
  std::ostringstream os;
  if (base_channels < 1) os << "discriminator base_channels must be >= 1; ";
  if (downsample_stages < 1) os << "discriminator downsample_stages must be >= 1; ";
  if (input_channels < 1) os << "discriminator input_channels must be >= 1; ";
  if (resolution < 1 || downsample_stages > 20 ||
      resolution % (1 << std::clamp(downsample_stages, 0, 20)) != 0) {
    os << "resolution " << resolution << " is not divisible by 2^" << downsample_stages << "; ";
  }
  if (!os.str().empty()) config_error(os.str().substr(0, os.str().size() - 2));
}

int middle_receptive_field(const GeneratorConfig& cfg) {
  cfg.validate();
  ParameterSet<float> scratch;
  Sequential<float> enc;
  append_encoder(enc, scratch, cfg, "");
  int field = 1, jump = 1;
  enc.receptive_field(field, jump);
  return field;
}

template <class T>
Tensor<T> Network<T>::forward(const Tensor<T>& in, LayerCache<T>* trace) const {
  const Shape s = in.shape();
  if (s.c != input_.c) {
    std::ostringstream os;
    os << "network expects " << input_.c << " input channels, got " << s.c;
    fail(ErrorCategory::shape_mismatch, os.str());
  }
  if (s.h != input_.h || s.w != input_.w) {
    std::ostringstream os;
    os << "network expects " << input_.h << "x" << input_.w << " inputs, got " << s.h << "x" << s.w;
    fail(ErrorCategory::shape_mismatch, os.str());
  }
  return arch_->forward(params_, in, trace);
}

template <class T>
Tensor<T> Network<T>::backward(const LayerCache<T>& trace, const Tensor<T>& grad_out,
                               ParameterSet<T>* grads, bool need_input_grad) const {
  return arch_->backward(params_, trace, grad_out, grads, need_input_grad);
}

template <class T>
Network<T> build_generator(const GeneratorConfig& cfg, const std::string& prefix, Rng& rng) {
  cfg.validate();
  ParameterSet<T> params;
  auto seq = std::make_shared<Sequential<T>>();
  append_encoder(*seq, params, cfg, prefix);
  int ch = cfg.base_channels << cfg.downsample_stages;
  for (int i = 0; i < cfg.downsample_stages; ++i) {
    seq->push(std::make_unique<Upsample2x<T>>());
    push_conv(*seq, params, prefix + "up" + std::to_string(i), {ch, ch / 2, 3, 1, 1, 1});
    seq->push(std::make_unique<InstanceNorm<T>>());
    seq->push(std::make_unique<LeakyRelu<T>>(0.0));
    ch /= 2;
  }
  const int pad = cfg.edge_kernel / 2;
  push_conv(*seq, params, prefix + "head", {ch, cfg.output_channels, cfg.edge_kernel, 1, pad, 1});
  seq->push(std::make_unique<Tanh<T>>());
  seq->init(params, rng);
  return Network<T>(std::move(seq), std::move(params),
                    {0, cfg.input_channels, cfg.resolution, cfg.resolution});
}

template <class T>
Network<T> build_discriminator(const DiscriminatorConfig& cfg, const std::string& prefix, Rng& rng) {
  cfg.validate();
  ParameterSet<T> params;
  auto seq = std::make_shared<Sequential<T>>();
  int in = cfg.input_channels;
  int ch = cfg.base_channels;
  for (int i = 0; i < cfg.downsample_stages; ++i) {
    push_conv(*seq, params, prefix + "down" + std::to_string(i), {in, ch, 4, 2, 1, 1});
    if (i > 0) seq->push(std::make_unique<InstanceNorm<T>>());
    seq->push(std::make_unique<LeakyRelu<T>>(0.2));
    in = ch;
    ch *= 2;
  }
  const int final_size = cfg.resolution >> cfg.downsample_stages;
  push_conv(*seq, params, prefix + "head", {in, 1, final_size, 1, 0, 1});
  seq->init(params, rng);
  return Network<T>(std::move(seq), std::move(params),
                    {0, cfg.input_channels, cfg.resolution, cfg.resolution});
}

template <class T>
ModelBundle<T> make_bundle(const GeneratorConfig& gen, const DiscriminatorConfig& disc,
                           std::uint64_t seed) {
  Rng rc(derive_seed(seed, {0xC}));
  Rng re(derive_seed(seed, {0xE}));
  Rng rd(derive_seed(seed, {0xD}));
  ModelBundle<T> b;
  b.generator_config = gen;
  b.discriminator_config = disc;
  b.completion = build_generator<T>(gen, "C.", rc);
  b.extrapolation = build_generator<T>(gen, "E.", re);
  b.discriminator = build_discriminator<T>(disc, "D.", rd);
  return b;
}

template <class T>
Tensor<T> complete(const Network<T>& C, const Tensor<T>& x_masked_with_mask) {
  return C.forward(x_masked_with_mask);
}

template <class T>
Tensor<T> extrapolate(const Network<T>& E, const Tensor<T>& x_outside_masked_with_complement) {
  return E.forward(x_outside_masked_with_complement);
}

double clamped_sigmoid(double logit) {
  const double p = logit >= 0 ? 1.0 / (1.0 + std::exp(-logit)) : std::exp(logit) / (1.0 + std::exp(logit));
  return std::clamp(p, kProbabilityEps, 1.0 - kProbabilityEps);
}

template <class T>
Tensor<T> discriminator_logits(const Network<T>& D, const Tensor<T>& x, LayerCache<T>* trace) {
  return D.forward(x, trace);
}

template <class T>
std::vector<double> discriminate(const Network<T>& D, const Tensor<T>& x) {
  const Tensor<T> logits = D.forward(x);
  std::vector<double> p(logits.numel());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = clamped_sigmoid(static_cast<double>(logits[i]));
  return p;
}

#define CYCPAINT_INSTANTIATE(T)                                                                  \
  template class Network<T>;                                                                     \
  template Network<T> build_generator<T>(const GeneratorConfig&, const std::string&, Rng&);     \
  template Network<T> build_discriminator<T>(const DiscriminatorConfig&, const std::string&, Rng&); \
  template ModelBundle<T> make_bundle<T>(const GeneratorConfig&, const DiscriminatorConfig&,   \
                                         std::uint64_t);                                        \
  template Tensor<T> complete(const Network<T>&, const Tensor<T>&);                              \
  template Tensor<T> extrapolate(const Network<T>&, const Tensor<T>&);                           \
  template std::vector<double> discriminate(const Network<T>&, const Tensor<T>&);               \
  template Tensor<T> discriminator_logits(const Network<T>&, const Tensor<T>&, LayerCache<T>*);

CYCPAINT_INSTANTIATE(float)
CYCPAINT_INSTANTIATE(double)

}  // namespace cycpaint
