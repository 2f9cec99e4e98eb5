// SPDX-License-Identifier: Apache-2.0
//
// Adversarial, contextual and reconstruction losses, the two cycle losses and
// their combined objective, together with the hand-derived gradients that the
// training step back-propagates.
//
// A cycle is parameterized by the region its first network fills:
//   forward cycle  = cycle(C, E, region = M)
//   backward cycle = cycle(E, C, region = 1 - M)
// so the backward cycle is the forward cycle with the networks swapped and the
// mask complemented, by construction.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "cycpaint/masking.hpp"
#include "cycpaint/networks.hpp"

namespace cycpaint {

struct LossWeights {
  double alpha = 10.0;  // contextual
  double beta = 10.0;   // reconstruction

  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossReport {
  double adv_C = 0.0;
  double ctx_C = 0.0;
  double rec_forward = 0.0;
  double adv_E = 0.0;
  double ctx_E = 0.0;
  double rec_backward = 0.0;
  double disc_loss = 0.0;
  double cyc_forward_total = 0.0;
  double cyc_backward_total = 0.0;
  double grand_total = 0.0;
  // Adversarial term of the cycle output in the forward cycle; zero unless
  // the optional forward E-adversarial term is enabled.
  double adv_E_forward = 0.0;

  /// Name of the first non-finite field, or empty when all are finite.
  std::string first_non_finite() const;

  /// One-line JSON record: {"step": N, "adv_C": ..., ...}.
  std::string to_log_line(long step) const;
  static LossReport from_log_line(const std::string& line, long* step = nullptr);

  friend bool operator==(const LossReport&, const LossReport&) = default;
};

struct CycleOptions {
  bool use_cycle_loss = true;
  // Adds the adversarial loss of the second network's composited output.
  bool second_adversarial = false;
};

// --- scalar kernels --------------------------------------------------------

/// -(mean log p_real + mean log(1 - p_fake)), probabilities already clamped.
double disc_loss_from_probabilities(std::span<const double> real, std::span<const double> fake);

/// -mean log p_fake
double gen_loss_from_probabilities(std::span<const double> fake);

/// Mean |output - target| over region cells (all channels); 0 for an empty
/// region.
template <class T>
double region_l1(const Tensor<T>& output, const Tensor<T>& target, const BinaryMap& region);

/// scale * d(region_l1)/d(output), accumulated into `grad`.
template <class T>
void region_l1_grad(const Tensor<T>& output, const Tensor<T>& target, const BinaryMap& region,
                    double scale, Tensor<T>& grad);

// --- network-level losses --------------------------------------------------

template <class T>
double adversarial_loss_disc(const Network<T>& D, const Tensor<T>& real, const Tensor<T>& fake);

template <class T>
double adversarial_loss_gen(const Network<T>& D, const Tensor<T>& fake);

template <class T>
double contextual_loss(const Tensor<T>& output, const Tensor<T>& target, const BinaryMap& region);

template <class T>
double reconstruction_loss(const Tensor<T>& cycle_out, const Tensor<T>& x, const BinaryMap& region);

/// Gradient of adversarial_loss_gen with respect to `fake`. Accumulates D
/// parameter gradients when `disc_grads` is non-null.
template <class T>
Tensor<T> adversarial_loss_gen_grad(const Network<T>& D, const Tensor<T>& fake, double* loss,
                                    ParameterSet<T>* disc_grads = nullptr);

/// Discriminator descent loss and its parameter gradient (accumulated).
template <class T>
double adversarial_loss_disc_grad(const Network<T>& D, const Tensor<T>& real, const Tensor<T>& fake,
                                  ParameterSet<T>& disc_grads);

// --- cycles ----------------------------------------------------------------

struct CycleTerms {
  double adv = 0.0;
  double ctx = 0.0;
  double rec = 0.0;
  double adv_second = 0.0;
  double total = 0.0;
};

template <class T>
struct CycleTrace {
  BinaryMap region;  // filled by the first network
  Tensor<T> x;
  Tensor<T> first_out;
  Tensor<T> composite;  // first_out restored with the known pixels of x
  Tensor<T> second_out;
  Tensor<T> second_composite;
  LayerCache<T> first_trace;
  LayerCache<T> second_trace;
  CycleTerms terms;
};

template <class T>
CycleTrace<T> run_cycle(const Network<T>& first, const Network<T>& second, const Network<T>& D,
                        const Tensor<T>& x, const BinaryMap& region, const LossWeights& w,
                        const CycleOptions& opt = {});

/// Back-propagates the cycle total. Null gradient sets are skipped. The
/// adversarial terms are re-evaluated against `D`, which may have been updated
/// since the forward pass; the returned terms reflect that.
template <class T>
CycleTerms backprop_cycle(const CycleTrace<T>& trace, const Network<T>& first, const Network<T>& second,
                    const Network<T>& D, const LossWeights& w, const CycleOptions& opt,
                    ParameterSet<T>* first_grads, ParameterSet<T>* second_grads,
                    ParameterSet<T>* disc_grads);

template <class T>
CycleTerms forward_cycle_loss(const Network<T>& C, const Network<T>& E, const Network<T>& D,
                              const Tensor<T>& x, const BinaryMap& M, const LossWeights& w,
                              const CycleOptions& opt = {});

template <class T>
CycleTerms backward_cycle_loss(const Network<T>& C, const Network<T>& E, const Network<T>& D,
                               const Tensor<T>& x, const BinaryMap& M, const LossWeights& w,
                               const CycleOptions& opt = {});

inline double total_objective(double forward, double backward) { return forward + backward; }

}  // namespace cycpaint
