// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "shloss/error.hpp"
#include "shloss/losses.hpp"

using namespace shloss;

namespace {

LossConfig config_for(LossFamily f) {
  LossConfig c;
  c.family = f;
  return c;
}

double loss_at(const std::vector<double>& logits, const std::vector<std::uint8_t>& y, double beta,
               const std::vector<std::uint64_t>& counts, const LossConfig& c) {
  return loss_and_grad({logits, y, beta, counts}, c).loss;
}

}  // namespace

TEST_CASE("scalar losses") {
  CHECK(bce(0.9, true) == doctest::Approx(0.1053605156578263).epsilon(1e-15));
  CHECK(bce(0.9, false) == doctest::Approx(-std::log(0.1)).epsilon(1e-15));
  CHECK(q_transform(0.3, true) == 0.3);
  CHECK(q_transform(0.3, false) == 0.7);
  CHECK(clamp_probability(0.0) == 1e-12);
  CHECK(clamp_probability(1.0) == 1.0 - 1e-12);
  CHECK(std::isfinite(bce(0.0, true)));
}

TEST_CASE("multi-label losses") {
  const std::vector<double> half = {0.5, 0.5};
  CHECK(ce_multilabel(half) == doctest::Approx(1.3862943611198906).epsilon(1e-15));
  CHECK(focal(std::vector<double>{0.9}, 2.0) == doctest::Approx(0.001053605156578263).epsilon(1e-14));
  CHECK(focal(std::vector<double>{0.5}, 2.0) == doctest::Approx(0.17328679513998633).epsilon(1e-15));
  CHECK(focal(half, 0.0) == doctest::Approx(ce_multilabel(half)).epsilon(1e-15));
  CHECK(cb_weight(100, 0.99) == doctest::Approx(0.015773675300856054).epsilon(1e-14));
  CHECK_THROWS_AS(cb_weight(0, 0.99), InvalidArgument);
  CHECK(sh(half, 2.0) == doctest::Approx(0.69314718055994531).epsilon(1e-15));
  CHECK(sh(std::vector<double>{0.9}, 2.4) == doctest::Approx(0.043900214857427626).epsilon(1e-14));
  CHECK(sh_focal(std::vector<double>{0.9}, 1.0, 2.0) == doctest::Approx(0.001053605156578263).epsilon(1e-14));
  CHECK(sh_focal(std::vector<double>{0.5, 0.9}, 2.4, 2.0) == doctest::Approx(0.072641833456901913).epsilon(1e-14));

  SUBCASE("cb_focal weights each class") {
    const std::vector<double> q = {0.5, 0.9};
    const std::vector<std::uint64_t> n = {100, 3};
    const double expect = cb_weight(100, 0.99) * focal(std::vector<double>{0.5}, 2.0) +
                          cb_weight(3, 0.99) * focal(std::vector<double>{0.9}, 2.0);
    CHECK(cb_focal(q, 2.0, 0.99, n) == doctest::Approx(expect).epsilon(1e-14));
  }
  SUBCASE("reduction identities") {
    std::mt19937_64 gen(31);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    for (int t = 0; t < 100; ++t) {
      std::vector<double> q(1 + gen() % 16);
      for (double& x : q) x = u(gen);
      double sum_bce = 0.0;
      for (double x : q) sum_bce += bce(x, true);
      CHECK(std::abs(sh_focal(q, 1.0, 0.0) - ce_multilabel(q)) < 1e-12);
      CHECK(std::abs(ce_multilabel(q) - sum_bce) < 1e-12);
      CHECK(std::abs(focal(q, 0.0) - ce_multilabel(q)) < 1e-12);
    }
  }
}

TEST_CASE("parse_loss_family") {
  CHECK(parse_loss_family("bce") == LossFamily::bce);
  CHECK(parse_loss_family("SH-Focal") == LossFamily::sh_focal);
  CHECK(parse_loss_family("CB_FOCAL") == LossFamily::cb_focal);
  CHECK(to_string(LossFamily::sh_focal) == "SH_FOCAL");
  CHECK_THROWS_AS(parse_loss_family("hinge"), InvalidArgument);
  CHECK(uses_beta_sh(LossFamily::sh));
  CHECK_FALSE(uses_beta_sh(LossFamily::focal));
}

TEST_CASE("loss_and_grad against autograd") {
  const std::vector<double> logits = {1.5, -0.25, 3.0, -2.0, 0.75};
  const std::vector<std::uint8_t> y = {1, 0, 0, 1, 1};
  const std::vector<std::uint64_t> counts = {500, 120, 40, 7, 1};
  struct Expect {
    LossFamily family;
    double loss;
    std::vector<double> grad;
  };
  const Expect cases[] = {
      {LossFamily::bce, 6.339739066593214,
       {-0.18242552380635635, 0.43782349911420193, 0.9525741268224334, -0.8807970779778824, -0.3208213008246071}},
      {LossFamily::focal, 4.57328216260718,
       {-0.017031105223235924, 0.20805637912486435, 1.1267498806348883, -1.076713730448482, -0.08710966202878866}},
      {LossFamily::sh, 2.6415579444138393,
       {-0.07601063491931515, 0.1824264579642508, 0.39690588617601386, -0.3669987824907843, -0.13367554201025295}},
      {LossFamily::sh_focal, 1.9055342344196582,
       {-0.0070962938430149695, 0.08669015796869349, 0.46947911693120353, -0.4486307210202008,
        -0.03629569251199527}},
      {LossFamily::cb_focal, 0.3679207169896488,
       {-0.00017143747928282153, 0.0029696054256114117, 0.03403787772808702, -0.1584925656164901,
        -0.08710966202878866}},
  };
  for (const auto& c : cases) {
    CAPTURE(to_string(c.family));
    const auto out = loss_and_grad({logits, y, 2.4, counts}, config_for(c.family));
    CHECK(out.loss == doctest::Approx(c.loss).epsilon(1e-13));
    REQUIRE(out.grad.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(out.grad[i] == doctest::Approx(c.grad[i]).epsilon(1e-12));
  }
}

TEST_CASE("gradients match central differences") {
  const std::vector<std::uint8_t> one = {1};
  const auto g = loss_and_grad({std::vector<double>{0.0}, one}, config_for(LossFamily::bce));
  CHECK(g.grad[0] == doctest::Approx(-0.5).epsilon(1e-15));

  std::mt19937_64 gen(37);
  std::uniform_real_distribution<double> logit(-4.0, 4.0), beta(1.0, 10.0);
  for (LossFamily f : {LossFamily::bce, LossFamily::focal, LossFamily::cb_focal, LossFamily::sh, LossFamily::sh_focal}) {
    const auto cfg = config_for(f);
    for (int t = 0; t < 20; ++t) {
      const std::size_t n = 1 + gen() % 32;
      std::vector<double> x(n);
      std::vector<std::uint8_t> y(n);
      std::vector<std::uint64_t> counts(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = logit(gen);
        y[i] = static_cast<std::uint8_t>(gen() & 1);
        counts[i] = 1 + gen() % 1000;
      }
      const double b = beta(gen);
      const auto analytic = loss_and_grad({x, y, b, counts}, cfg).grad;
      for (std::size_t i = 0; i < n; ++i) {
        auto xp = x, xm = x;
        xp[i] += 1e-5;
        xm[i] -= 1e-5;
        const double fd = (loss_at(xp, y, b, counts, cfg) - loss_at(xm, y, b, counts, cfg)) / 2e-5;
        CHECK(std::abs(analytic[i] - fd) <= 1e-4 * std::max(1e-3, std::abs(fd)));
      }
    }
  }
}

TEST_CASE("loss_and_grad edge cases") {
  const std::vector<std::uint8_t> y = {1, 0};
  SUBCASE("saturated logits stay finite; clamped entries have zero gradient") {
    const std::vector<double> x = {-60.0, 60.0};
    const auto out = loss_and_grad({x, y}, config_for(LossFamily::bce));
    CHECK(std::isfinite(out.loss));
    CHECK(out.loss == doctest::Approx(-2.0 * std::log(1e-12)));
    CHECK(out.grad == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("non-finite logit throws") {
    const std::vector<double> x = {NAN, 0.0};
    CHECK_THROWS_AS(loss_and_grad({x, y}, config_for(LossFamily::bce)), NumericError);
  }
  SUBCASE("shape mismatch throws") {
    const std::vector<double> x = {0.0};
    CHECK_THROWS_AS(loss_and_grad({x, y}, config_for(LossFamily::bce)), InvalidArgument);
  }
  SUBCASE("cb_focal needs counts") {
    const std::vector<double> x = {0.0, 0.0};
    CHECK_THROWS_AS(loss_and_grad({x, y}, config_for(LossFamily::cb_focal)), InvalidArgument);
  }
  SUBCASE("SH scales BCE by 1/beta") {
    const std::vector<double> x = {0.3, -1.1};
    const double b = loss_at(x, y, 3.0, {}, config_for(LossFamily::bce));
    const double s = loss_at(x, y, 3.0, {}, config_for(LossFamily::sh));
    CHECK(s == doctest::Approx(b / 3.0).epsilon(1e-15));
  }
  SUBCASE("config validation") {
    LossConfig c;
    c.gamma = -1;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = LossConfig{};
    c.cb_beta = 1.0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
  }
}
