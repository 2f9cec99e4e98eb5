// SPDX-License-Identifier: Apache-2.0

#include "cycpaint/losses.hpp"

#include <cmath>
#include <limits>
#include "json.hpp"

namespace cycpaint {

namespace {

bool clamped(double logit) {
  const double p = 1.0 / (1.0 + std::exp(-logit));
  return !(p > kProbabilityEps && p < 1.0 - kProbabilityEps);
}

void require_finite(double v, const char* term) {
  if (!std::isfinite(v)) fail(ErrorCategory::non_finite, std::string("non-finite value in ") + term);
}

template <class T>
std::vector<double> probabilities(const Tensor<T>& logits) {
  std::vector<double> p(logits.numel());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = clamped_sigmoid(static_cast<double>(logits[i]));
  return p;
}

// First `channels` channels of each image.
template <class T>
Tensor<T> leading_channels(const Tensor<T>& t, int channels) {
  const Shape s = t.shape();
  Tensor<T> out({s.n, channels, s.h, s.w});
  for (int n = 0; n < s.n; ++n) std::copy_n(t.plane(n, 0), s.plane() * channels, out.plane(n, 0));
  return out;
}

// grad += where(region == value, g, 0)
template <class T>
void accumulate_where(Tensor<T>& grad, const Tensor<T>& g, const BinaryMap& region, std::uint8_t value) {
  const std::size_t plane = grad.shape().plane();
  const std::size_t planes = static_cast<std::size_t>(grad.shape().n) * grad.shape().c;
  for (std::size_t q = 0; q < planes; ++q) {
    T* dst = grad.data() + q * plane;
    const T* src = g.data() + q * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      if (region.cells[i] == value) dst[i] += src[i];
    }
  }
}

// d(-mean log p)/dz for each logit.
template <class T>
Tensor<T> gen_logit_grad(const Tensor<T>& logits) {
  Tensor<T> g(logits.shape());
  const double inv_n = 1.0 / static_cast<double>(logits.numel());
  for (std::size_t i = 0; i < logits.numel(); ++i) {
    const double z = logits[i];
    g[i] = clamped(z) ? T(0) : static_cast<T>(-(1.0 - 1.0 / (1.0 + std::exp(-z))) * inv_n);
  }
  return g;
}

}  // namespace

void LossWeights::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) fail(ErrorCategory::config, "loss weights must be >= 0");
}

std::string LossReport::first_non_finite() const {
  const std::pair<const char*, double> fields[] = {
      {"adv_C", adv_C},         {"ctx_C", ctx_C},
      {"rec_forward", rec_forward}, {"adv_E", adv_E},
      {"ctx_E", ctx_E},         {"rec_backward", rec_backward},
      {"disc_loss", disc_loss}, {"cyc_forward_total", cyc_forward_total},
      {"cyc_backward_total", cyc_backward_total}, {"grand_total", grand_total},
      {"adv_E_forward", adv_E_forward}};
  for (const auto& [name, v] : fields) {
    if (!std::isfinite(v)) return name;
  }
  return {};
}

std::string LossReport::to_log_line(long step) const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["adv_C"] = adv_C;
  j["ctx_C"] = ctx_C;
  j["rec_forward"] = rec_forward;
  j["adv_E"] = adv_E;
  j["ctx_E"] = ctx_E;
  j["rec_backward"] = rec_backward;
  j["disc_loss"] = disc_loss;
  j["cyc_forward_total"] = cyc_forward_total;
  j["cyc_backward_total"] = cyc_backward_total;
  j["grand_total"] = grand_total;
  if (adv_E_forward != 0.0) j["adv_E_forward"] = adv_E_forward;
  return j.dump();
}

LossReport LossReport::from_log_line(const std::string& line, long* step) {
  const auto j = nlohmann::json::parse(line);
  LossReport r;
  r.adv_C = j.at("adv_C");
  r.ctx_C = j.at("ctx_C");
  r.rec_forward = j.at("rec_forward");
  r.adv_E = j.at("adv_E");
  r.ctx_E = j.at("ctx_E");
  r.rec_backward = j.at("rec_backward");
  r.disc_loss = j.at("disc_loss");
  r.cyc_forward_total = j.at("cyc_forward_total");
  r.cyc_backward_total = j.at("cyc_backward_total");
  r.grand_total = j.at("grand_total");
  r.adv_E_forward = j.value("adv_E_forward", 0.0);
  if (step) *step = j.at("step");
  return r;
}

double disc_loss_from_probabilities(std::span<const double> real, std::span<const double> fake) {
  if (real.empty() || fake.empty()) fail(ErrorCategory::empty_input, "discriminator loss needs real and fake images");
  double lr = 0.0, lf = 0.0;
  for (double p : real) lr += std::log(p);
  for (double p : fake) lf += std::log(1.0 - p);
  return -(lr / static_cast<double>(real.size()) + lf / static_cast<double>(fake.size()));
}

double gen_loss_from_probabilities(std::span<const double> fake) {
  if (fake.empty()) fail(ErrorCategory::empty_input, "generator adversarial loss needs fake images");
  double l = 0.0;
  for (double p : fake) l += std::log(p);
  return -l / static_cast<double>(fake.size());
}

template <class T>
double region_l1(const Tensor<T>& output, const Tensor<T>& target, const BinaryMap& region) {
  require_same_shape(output.shape(), target.shape(), "region_l1");
  const Shape s = output.shape();
  if (s.h != region.height || s.w != region.width) {
    fail(ErrorCategory::shape_mismatch, "region_l1: region size does not match images " + s.str());
  }
  const std::size_t ones = region.ones();
  if (ones == 0) return 0.0;
  const std::size_t plane = s.plane();
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  double sum = 0.0;
  for (std::size_t q = 0; q < planes; ++q) {
    const T* o = output.data() + q * plane;
    const T* t = target.data() + q * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      if (region.cells[i]) sum += std::abs(static_cast<double>(o[i]) - static_cast<double>(t[i]));
    }
  }
  return sum / (static_cast<double>(ones) * static_cast<double>(planes));
}

template <class T>
void region_l1_grad(const Tensor<T>& output, const Tensor<T>& target, const BinaryMap& region,
                    double scale, Tensor<T>& grad) {
  const Shape s = output.shape();
  const std::size_t ones = region.ones();
  if (ones == 0 || scale == 0.0) return;
  const std::size_t plane = s.plane();
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  const double k = scale / (static_cast<double>(ones) * static_cast<double>(planes));
  for (std::size_t q = 0; q < planes; ++q) {
    const T* o = output.data() + q * plane;
    const T* t = target.data() + q * plane;
    T* g = grad.data() + q * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      if (!region.cells[i]) continue;
      const double d = static_cast<double>(o[i]) - static_cast<double>(t[i]);
      if (d > 0) g[i] += static_cast<T>(k);
      else if (d < 0) g[i] -= static_cast<T>(k);
    }
  }
}

template <class T>
double adversarial_loss_disc(const Network<T>& D, const Tensor<T>& real, const Tensor<T>& fake) {
  const auto pr = discriminate(D, real);
  const auto pf = discriminate(D, fake);
  const double loss = disc_loss_from_probabilities(pr, pf);
  require_finite(loss, "disc_loss");
  return loss;
}

template <class T>
double adversarial_loss_gen(const Network<T>& D, const Tensor<T>& fake) {
  const double loss = gen_loss_from_probabilities(discriminate(D, fake));
  require_finite(loss, "adversarial generator loss");
  return loss;
}

template <class T>
double contextual_loss(const Tensor<T>& output, const Tensor<T>& target, const BinaryMap& region) {
  return region_l1(output, target, region);
}

template <class T>
double reconstruction_loss(const Tensor<T>& cycle_out, const Tensor<T>& x, const BinaryMap& region) {
  return region_l1(cycle_out, x, region);
}

template <class T>
Tensor<T> adversarial_loss_gen_grad(const Network<T>& D, const Tensor<T>& fake, double* loss,
                                    ParameterSet<T>* disc_grads) {
  LayerCache<T> trace;
  const Tensor<T> logits = D.forward(fake, &trace);
  const double l = gen_loss_from_probabilities(probabilities(logits));
  require_finite(l, "adversarial generator loss");
  if (loss) *loss = l;
  return D.backward(trace, gen_logit_grad(logits), disc_grads, true);
}

template <class T>
double adversarial_loss_disc_grad(const Network<T>& D, const Tensor<T>& real, const Tensor<T>& fake,
                                  ParameterSet<T>& disc_grads) {
  LayerCache<T> tr, tf;
  const Tensor<T> zr = D.forward(real, &tr);
  const Tensor<T> zf = D.forward(fake, &tf);
  const double loss = disc_loss_from_probabilities(probabilities(zr), probabilities(zf));
  require_finite(loss, "disc_loss");

  // d/dz of -mean log sigmoid(z) is -(1 - p)/n; of -mean log(1 - sigmoid(z)) is p/n.
  Tensor<T> gr(zr.shape()), gf(zf.shape());
  for (std::size_t i = 0; i < zr.numel(); ++i) {
    const double z = zr[i];
    gr[i] = clamped(z) ? T(0) : static_cast<T>(-(1.0 - 1.0 / (1.0 + std::exp(-z))) / static_cast<double>(zr.numel()));
  }
  for (std::size_t i = 0; i < zf.numel(); ++i) {
    const double z = zf[i];
    gf[i] = clamped(z) ? T(0) : static_cast<T>((1.0 / (1.0 + std::exp(-z))) / static_cast<double>(zf.numel()));
  }
  D.backward(tr, gr, &disc_grads, false);
  D.backward(tf, gf, &disc_grads, false);
  return loss;
}

template <class T>
CycleTrace<T> run_cycle(const Network<T>& first, const Network<T>& second, const Network<T>& D,
                        const Tensor<T>& x, const BinaryMap& region, const LossWeights& w,
                        const CycleOptions& opt) {
  CycleTrace<T> t;
  t.region = region;
  t.x = x;
  const BinaryMap known = complement(region);

  t.first_out = first.forward(concat_mask_channel(inside_masked(x, region), region), &t.first_trace);
  t.composite = restore_known(t.first_out, x, known);
  t.terms.adv = gen_loss_from_probabilities(discriminate(D, t.composite));
  t.terms.ctx = contextual_loss(t.first_out, x, region);

  if (opt.use_cycle_loss || opt.second_adversarial) {
    t.second_out = second.forward(concat_mask_channel(outside_masked(t.first_out, region), known),
                                  &t.second_trace);
    if (opt.use_cycle_loss) t.terms.rec = reconstruction_loss(t.second_out, x, known);
    if (opt.second_adversarial) {
      t.second_composite = restore_known(t.second_out, t.first_out, region);
      t.terms.adv_second = gen_loss_from_probabilities(discriminate(D, t.second_composite));
    }
  }
  t.terms.total = t.terms.adv + w.alpha * t.terms.ctx + w.beta * t.terms.rec + t.terms.adv_second;
  return t;
}

template <class T>
CycleTerms backprop_cycle(const CycleTrace<T>& t, const Network<T>& first, const Network<T>& second,
                    const Network<T>& D, const LossWeights& w, const CycleOptions& opt,
                    ParameterSet<T>* first_grads, ParameterSet<T>* second_grads,
                    ParameterSet<T>* disc_grads) {
  const BinaryMap known = complement(t.region);
  Tensor<T> g_first(t.first_out.shape());
  CycleTerms terms = t.terms;

  const Tensor<T> g_comp = adversarial_loss_gen_grad(D, t.composite, &terms.adv, disc_grads);
  accumulate_where(g_first, g_comp, t.region, 1);
  region_l1_grad(t.first_out, t.x, t.region, w.alpha, g_first);

  const bool run_second = opt.use_cycle_loss || opt.second_adversarial;
  if (run_second) {
    Tensor<T> g_second(t.second_out.shape());
    if (opt.use_cycle_loss) region_l1_grad(t.second_out, t.x, known, w.beta, g_second);
    if (opt.second_adversarial) {
      const Tensor<T> g_sc = adversarial_loss_gen_grad(D, t.second_composite, &terms.adv_second, disc_grads);
      accumulate_where(g_second, g_sc, known, 1);
      accumulate_where(g_first, g_sc, t.region, 1);
    }
    const Tensor<T> g_in = second.backward(t.second_trace, g_second, second_grads, first_grads != nullptr);
    if (first_grads) accumulate_where(g_first, leading_channels(g_in, t.first_out.shape().c), t.region, 1);
  }
  if (first_grads) first.backward(t.first_trace, g_first, first_grads, false);
  terms.total = terms.adv + w.alpha * terms.ctx + w.beta * terms.rec + terms.adv_second;
  return terms;
}

template <class T>
CycleTerms forward_cycle_loss(const Network<T>& C, const Network<T>& E, const Network<T>& D,
                              const Tensor<T>& x, const BinaryMap& M, const LossWeights& w,
                              const CycleOptions& opt) {
  return run_cycle(C, E, D, x, M, w, opt).terms;
}

template <class T>
CycleTerms backward_cycle_loss(const Network<T>& C, const Network<T>& E, const Network<T>& D,
                               const Tensor<T>& x, const BinaryMap& M, const LossWeights& w,
                               const CycleOptions& opt) {
  return run_cycle(E, C, D, x, complement(M), w, opt).terms;
}

#define CYCPAINT_INSTANTIATE(T)                                                                    \
  template double region_l1(const Tensor<T>&, const Tensor<T>&, const BinaryMap&);                 \
  template void region_l1_grad(const Tensor<T>&, const Tensor<T>&, const BinaryMap&, double,       \
                               Tensor<T>&);                                                        \
  template double adversarial_loss_disc(const Network<T>&, const Tensor<T>&, const Tensor<T>&);    \
  template double adversarial_loss_gen(const Network<T>&, const Tensor<T>&);                       \
  template double contextual_loss(const Tensor<T>&, const Tensor<T>&, const BinaryMap&);           \
  template double reconstruction_loss(const Tensor<T>&, const Tensor<T>&, const BinaryMap&);       \
  template Tensor<T> adversarial_loss_gen_grad(const Network<T>&, const Tensor<T>&, double*,       \
                                               ParameterSet<T>*);                                  \
  template double adversarial_loss_disc_grad(const Network<T>&, const Tensor<T>&,                  \
                                             const Tensor<T>&, ParameterSet<T>&);                  \
  template CycleTrace<T> run_cycle(const Network<T>&, const Network<T>&, const Network<T>&,        \
                                   const Tensor<T>&, const BinaryMap&, const LossWeights&,         \
                                   const CycleOptions&);                                           \
  template CycleTerms backprop_cycle(const CycleTrace<T>&, const Network<T>&, const Network<T>&,         \
                               const Network<T>&, const LossWeights&, const CycleOptions&,         \
                               ParameterSet<T>*, ParameterSet<T>*, ParameterSet<T>*);              \
  template CycleTerms forward_cycle_loss(const Network<T>&, const Network<T>&, const Network<T>&,  \
                                         const Tensor<T>&, const BinaryMap&, const LossWeights&,   \
                                         const CycleOptions&);                                     \
  template CycleTerms backward_cycle_loss(const Network<T>&, const Network<T>&, const Network<T>&, \
                                          const Tensor<T>&, const BinaryMap&, const LossWeights&,  \
                                          const CycleOptions&);

CYCPAINT_INSTANTIATE(float)
CYCPAINT_INSTANTIATE(double)

}  // namespace cycpaint
