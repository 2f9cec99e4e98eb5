// SPDX-License-Identifier: Apache-2.0
//
// Analytic gradients against central finite differences, in double precision.

#include <memory>

#include "cycpaint/training.hpp"
#include "doctest.h"
#include "support/gradcheck.hpp"
#include "support/helpers.hpp"
#include "support/mini.hpp"
#include "support/oracle.hpp"

using namespace cycpaint;

namespace {

// Smooth layers are checked against the plain step; the residual here is the
// truncation error of the central difference.
constexpr double kLayerTolerance = 1e-4;

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  return s;
}

// Checks input and parameter gradients of a single layer under the linear
// functional loss sum(g * layer(x)).
void check_layer(const Layer<double>& layer, ParameterSet<double>& params, Tensor<double> x, Rng& rng) {
  const Shape os = layer.output_shape(x.shape());
  const Tensor<double> g = testutil::random_tensor<double>(os, rng);
  LayerCache<double> cache;
  layer.forward(params, x, &cache);
  ParameterSet<double> grads = params.zeros_like();
  const Tensor<double> gx = layer.backward(params, cache, g, &grads, true);
  REQUIRE(gx.shape() == x.shape());

  auto loss = [&] { return dot(g, layer.forward(params, x, nullptr)); };
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double saved = x[i];
    x[i] = saved + testutil::kFdStep;
    const double up = loss();
    x[i] = saved - testutil::kFdStep;
    const double down = loss();
    x[i] = saved;
    CHECK(testutil::relative_error(gx[i], (up - down) / (2 * testutil::kFdStep)) < kLayerTolerance);
  }
  if (params.size() > 0) {
    const auto r = testutil::check_parameter_gradients(params, grads, loss, rng, 1000);
    INFO(r.worst_entry);
    CHECK(r.worst < kLayerTolerance);
  }
}

template <class F>
testutil::KinkSignature signature(F evaluate) {
  return [evaluate] {
    oracle::ScopedKinkLog scope;
    evaluate();
    return scope.log.sides;
  };
}

void check_result(const testutil::GradCheckResult& r) {
  INFO("worst tensor " << r.worst_tensor << " error " << r.worst);
  INFO("worst entry " << r.worst_entry);
  INFO("skipped across kinks: " << r.skipped << " of " << r.checked + r.skipped);
  std::string under;
  for (const auto& name : r.undercovered) under += name + " ";
  INFO("undercovered: " << under);
  CHECK(r.undercovered.empty());
  CHECK(r.worst < 1e-3);
}

}  // namespace

TEST_CASE("layer gradients") {
  Rng rng(1);
  SUBCASE("strided dilated padded convolution") {
    for (const ConvSpec s : {ConvSpec{2, 3, 3, 1, 1, 1}, ConvSpec{2, 3, 3, 2, 1, 1}, ConvSpec{2, 2, 3, 1, 2, 2},
                             ConvSpec{3, 1, 4, 2, 1, 1}, ConvSpec{2, 1, 5, 1, 2, 1}}) {
      ParameterSet<double> ps;
      Conv2d<double> conv(ps, "c", s, 0.5);
      conv.init(ps, rng);
      for (double& b : ps[1].values()) b = rng.normal();
      check_layer(conv, ps, testutil::random_tensor<double>({2, s.in_channels, 6, 6}, rng), rng);
    }
  }
  SUBCASE("instance norm") {
    ParameterSet<double> ps;
    check_layer(InstanceNorm<double>(), ps, testutil::random_tensor<double>({2, 3, 3, 4}, rng), rng);
  }
  SUBCASE("pointwise") {
    ParameterSet<double> ps;
    check_layer(LeakyRelu<double>(0.2), ps, testutil::random_far_from_zero<double>({1, 2, 3, 3}, rng), rng);
    check_layer(LeakyRelu<double>(0.0), ps, testutil::random_far_from_zero<double>({1, 2, 3, 3}, rng), rng);
    check_layer(Tanh<double>(), ps, testutil::random_tensor<double>({1, 2, 3, 3}, rng, -2, 2), rng);
    check_layer(Upsample2x<double>(), ps, testutil::random_tensor<double>({2, 2, 2, 3}, rng), rng);
  }
  SUBCASE("residual block") {
    ParameterSet<double> ps;
    auto body = std::make_unique<Sequential<double>>();
    body->push(std::make_unique<Conv2d<double>>(ps, "r.conv", ConvSpec{2, 2, 3, 1, 2, 2}, 0.5));
    body->push(std::make_unique<Tanh<double>>());
    Residual<double> res(std::move(body));
    res.init(ps, rng);
    check_layer(res, ps, testutil::random_tensor<double>({2, 2, 5, 5}, rng), rng);
  }
}

TEST_CASE("generator and discriminator parameter gradients") {
  Rng rng(2);
  auto b = testutil::mini_bundle<double>(8, 2);
  const Tensor<double> in = testutil::random_tensor<double>({2, 4, 8, 8}, rng);
  const Tensor<double> x = testutil::random_tensor<double>({3, 3, 8, 8}, rng);
  SUBCASE("completion network") {
    Network<double>& C = b.completion;
    const Tensor<double> g = testutil::random_tensor<double>({2, 3, 8, 8}, rng);
    LayerCache<double> trace;
    C.forward(in, &trace);
    ParameterSet<double> grads = C.params().zeros_like();
    C.backward(trace, g, &grads, false);
    const oracle::Img oin = oracle::from_tensor(in);
    check_result(testutil::check_parameter_gradients(
        C.params(), grads, [&] { return dot(g, C.forward(in)); }, rng, 5, testutil::kFdStep,
        signature([&] { oracle::generator(C, testutil::mini_generator(8), "C.", oin); })));
  }
  SUBCASE("discriminator logits") {
    Network<double>& D = b.discriminator;
    const Tensor<double> g = testutil::random_tensor<double>({3, 1, 1, 1}, rng);
    LayerCache<double> trace;
    discriminator_logits(D, x, &trace);
    ParameterSet<double> grads = D.params().zeros_like();
    D.backward(trace, g, &grads, false);
    const oracle::Img ox = oracle::from_tensor(x);
    check_result(testutil::check_parameter_gradients(
        D.params(), grads, [&] { return dot(g, discriminator_logits(D, x)); }, rng, 5, testutil::kFdStep,
        signature([&] { oracle::disc_logits(D, testutil::mini_discriminator(8), "D.", ox); })));
  }
}

TEST_CASE("training objective gradients") {
  for (const bool extra_adv : {false, true}) {
    CAPTURE(extra_adv);
    auto b = testutil::mini_bundle<double>(8, 3);
    Rng rng(extra_adv ? 4 : 3);
    const Tensor<double> x = testutil::random_extreme<double>({1, 3, 8, 8}, rng);
    const Mask M = testutil::random_square(8, 8, rng);
    const LossWeights w;
    CycleOptions opt;
    opt.second_adversarial = extra_adv;

    auto objective = [&] {
      const auto cycles = run_cycles(b, x, M.grid, w, opt);
      return cycles.forward.terms.total + cycles.backward.terms.total;
    };
    const auto cycles = run_cycles(b, x, M.grid, w, opt);
    ParameterSet<double> gC = b.completion.params().zeros_like();
    ParameterSet<double> gE = b.extrapolation.params().zeros_like();
    ParameterSet<double> gD = b.discriminator.params().zeros_like();
    const ObjectiveTerms terms = generator_gradients(b, cycles, w, opt, &gC, &gE, &gD);
    CHECK(terms.forward.total + terms.backward.total == doctest::Approx(objective()).epsilon(1e-12));

    const oracle::Img ox = oracle::from_tensor(x);
    const auto kinks = signature([&] {
      const auto g = testutil::mini_generator(8);
      const auto d = testutil::mini_discriminator(8);
      oracle::cycle(b.completion, "C.", b.extrapolation, "E.", b.discriminator, g, d, ox, M.grid, w.alpha, w.beta,
                    true, extra_adv);
      oracle::cycle(b.extrapolation, "E.", b.completion, "C.", b.discriminator, g, d, ox, oracle::invert(M.grid),
                    w.alpha, w.beta, true, extra_adv);
    });
    for (auto [net, grads] : {std::pair{&b.completion, &gC}, std::pair{&b.extrapolation, &gE},
                              std::pair{&b.discriminator, &gD}}) {
      CAPTURE(net->params().name(0));
      check_result(
          testutil::check_parameter_gradients(net->params(), *grads, objective, rng, 5, testutil::kFdStep, kinks));
    }
  }
}

TEST_CASE("discriminator loss gradients") {
  auto b = testutil::mini_bundle<double>(8, 5);
  Rng rng(5);
  const Tensor<double> real = testutil::random_tensor<double>({2, 3, 8, 8}, rng);
  const Tensor<double> fake = testutil::random_tensor<double>({4, 3, 8, 8}, rng);
  ParameterSet<double> gD = b.discriminator.params().zeros_like();
  const double loss = discriminator_gradients(b, real, fake, gD);
  CHECK(loss == doctest::Approx(adversarial_loss_disc(b.discriminator, real, fake)).epsilon(1e-12));
  const oracle::Img oreal = oracle::from_tensor(real), ofake = oracle::from_tensor(fake);
  check_result(testutil::check_parameter_gradients(
      b.discriminator.params(), gD, [&] { return adversarial_loss_disc(b.discriminator, real, fake); }, rng, 5,
      testutil::kFdStep, signature([&] {
        const auto d = testutil::mini_discriminator(8);
        oracle::mean_log(oracle::disc_logits(b.discriminator, d, "D.", oreal), false);
        oracle::mean_log(oracle::disc_logits(b.discriminator, d, "D.", ofake), true);
      })));
}

TEST_CASE("without the cycle loss the forward cycle sends no gradient to E") {
  auto b = testutil::mini_bundle<double>(8, 6);
  Rng rng(6);
  const Tensor<double> x = testutil::random_tensor<double>({2, 3, 8, 8}, rng);
  const Mask M = testutil::random_square(8, 8, rng);
  CycleOptions off;
  off.use_cycle_loss = false;
  const auto t = run_cycle(b.completion, b.extrapolation, b.discriminator, x, M.grid, LossWeights{}, off);
  ParameterSet<double> gC = b.completion.params().zeros_like();
  ParameterSet<double> gE = b.extrapolation.params().zeros_like();
  const CycleTerms terms =
      backprop_cycle(t, b.completion, b.extrapolation, b.discriminator, LossWeights{}, off, &gC, &gE,
                     static_cast<ParameterSet<double>*>(nullptr));
  CHECK(terms.rec == 0.0);
  CHECK(gE == b.extrapolation.params().zeros_like());
  CHECK_FALSE(gC == b.completion.params().zeros_like());
}
