#include "madmm/rules.hpp"

#include "../support/random_problems.hpp"

#include "doctest.h"

#include <cmath>

using namespace madmm;

namespace {

// One scalar-block problem x + z = c so lagged differences are easy to dictate.
MulticonstraintProblem scalar_pair() {
  MulticonstraintProblem p;
  p.m = 2;
  p.n = 2;
  p.f = QuadraticObjective{Matrix::Identity(2, 2), Vector::Zero(2)};
  p.g = QuadraticObjective{Matrix::Identity(2, 2), Vector::Zero(2)};
  for (int j = 0; j < 2; ++j) {
    Matrix e = Matrix::Zero(1, 2);
    e(0, j) = 1.0;
    p.blocks.emplace_back(e, e, Vector::Ones(1));
  }
  p.validate();
  return p;
}

Snapshot snap(const Vector& rho, const Vector& x, const Vector& z, const Vector& y, const Vector& yt) {
  return Snapshot{rho, x, z, y, yt};
}

}  // namespace

TEST_SUITE("rules") {
  TEST_CASE("spectral ratio branch table") {
    const RuleConfig cfg;
    CHECK(spectral_ratio_branch(0.0, 2.0, 5.0, cfg) == 0.5);
    CHECK(spectral_ratio_branch(3.0, 0.0, 5.0, cfg) == 50.0);
    CHECK(spectral_ratio_branch(0.0, 0.0, 5.0, cfg) == 5.0);
    CHECK(spectral_ratio_branch(3.0, 2.0, 5.0, cfg) == 1.5);
  }

  TEST_CASE("curvature estimate on equal unit differences") {
    // A dx = B dz = 1 and dy~ = dy = 2: both curvatures are 2, rho = 2.
    const Vector one = Vector::Ones(1);
    const Vector two = Vector::Constant(1, 2.0);
    const auto est = bbs_estimate(one, two, one, two, 0.2);
    REQUIRE(est.has_value());
    CHECK(*est == doctest::Approx(2.0));
  }

  TEST_CASE("curvature safeguard rejects orthogonal differences") {
    Vector a(2), b(2);
    a << 1.0, 0.0;
    b << 0.0, 1.0;
    CHECK_FALSE(bbs_estimate(a, b, a, a, 0.2).has_value());
    CHECK_FALSE(bbs_estimate(Vector::Zero(2), a, a, a, 0.2).has_value());
  }

  TEST_CASE("grouped penalty is the geometric mean") {
    Vector rho(3);
    rho << 1.0, 10.0, 100.0;
    CHECK(grouped_penalty(PenaltyVector(rho, BlockLayout({1, 1, 1}))) == doctest::Approx(10.0));
  }

  TEST_CASE("multiparameter spectral rule acts per block") {
    const auto p = scalar_pair();
    const auto lay = p.layout();
    const RuleConfig cfg;
    RuleContext ctx(p, cfg.window());
    const Vector rho = Vector::Ones(2);
    Vector y1(2), z1(2);
    y1 << 4.0, 0.0;
    z1 << 2.0, 3.0;
    ctx.push(snap(rho, Vector::Zero(2), Vector::Zero(2), Vector::Zero(2), Vector::Zero(2)));
    ctx.push(snap(rho, Vector::Zero(2), z1, y1, y1));
    const auto out = mpsra_update(5, ctx, PenaltyVector(rho, lay), cfg);
    CHECK(out[0] == doctest::Approx(2.0));  // |dy| / |B dz| = 4 / 2
    CHECK(out[1] == doctest::Approx(0.1));  // dy = 0: divide by tau
    const auto single = sra_single_update(5, ctx, PenaltyVector(rho, lay), cfg);
    CHECK(single[0] == doctest::Approx(4.0 / std::hypot(2.0, 3.0)));
    CHECK(single[0] == single[1]);
  }

  TEST_CASE("rules only act on period boundaries") {
    const auto p = scalar_pair();
    std::mt19937_64 rng(31);
    for (const auto& name : rule_names()) {
      const auto rule = make_rule(name);
      RuleContext ctx(p, rule->config().window());
      const PenaltyVector pv(Vector::Constant(2, 3.0), p.layout());
      for (long k = 0; k < 20; ++k) {
        ctx.push(snap(pv.values(), testing::gaussian_vector(rng, 2), testing::gaussian_vector(rng, 2),
                      testing::gaussian_vector(rng, 2), testing::gaussian_vector(rng, 2)));
        if (k % rule->config().period != 0) CHECK(rule->update(k, ctx, pv).values() == pv.values());
      }
    }
  }

  TEST_CASE("residual balancing moves by tau") {
    const auto p = scalar_pair();
    const RuleConfig cfg;
    RuleContext ctx(p, cfg.window());
    const PenaltyVector pv(Vector::Ones(2), p.layout());
    // Large primal residual, no z movement: rho grows.
    ctx.push(snap(pv.values(), Vector::Zero(2), Vector::Zero(2), Vector::Zero(2), Vector::Zero(2)));
    ctx.push(snap(pv.values(), Vector::Constant(2, 5.0), Vector::Zero(2), Vector::Zero(2), Vector::Zero(2)));
    CHECK(rb_update(5, ctx, pv, cfg)[0] == doctest::Approx(2.0));
    // Feasible point with large z movement: rho shrinks.
    Vector x(2), z(2);
    x << 1.0, 1.0;
    z << 0.0, 0.0;
    RuleContext ctx2(p, cfg.window());
    ctx2.push(snap(pv.values(), x, Vector::Constant(2, 7.0), Vector::Zero(2), Vector::Zero(2)));
    ctx2.push(snap(pv.values(), x, z, Vector::Zero(2), Vector::Zero(2)));
    CHECK(rb_update(5, ctx2, pv, cfg)[0] == doctest::Approx(0.5));
  }

  TEST_CASE("unknown rule names and bad configs are rejected") {
    CHECK_THROWS_AS(make_rule("nosuch"), StructuralError);
    RuleConfig cfg;
    cfg.period = 0;
    CHECK_THROWS_AS(make_rule("mpsra", cfg), StructuralError);
    cfg = RuleConfig{};
    cfg.tau_incr = 1.0;
    CHECK_THROWS_AS(cfg.validate(), StructuralError);
    CHECK(is_multiparameter_rule("mpbbs"));
    CHECK_FALSE(is_multiparameter_rule("bbs"));
    CHECK(rule_names().size() == 6);
  }

  TEST_CASE("extreme histories keep penalties finite and positive") {
    const auto p = scalar_pair();
    std::mt19937_64 rng(32);
    std::uniform_int_distribution<int> expo(-300, 300);
    auto wild = [&]() {
      Vector v(2);
      for (Index i = 0; i < 2; ++i) v[i] = (expo(rng) % 2 ? 1.0 : -1.0) * std::pow(10.0, expo(rng));
      return v;
    };
    for (const auto& name : rule_names()) {
      const auto rule = make_rule(name);
      for (int t = 0; t < 500; ++t) {
        RuleContext ctx(p, rule->config().window());
        Vector rho(2);
        rho << std::pow(10.0, expo(rng)), std::pow(10.0, expo(rng));
        for (int d = 0; d < 11; ++d) ctx.push(snap(rho, wild(), wild(), wild(), wild()));
        const auto out = rule->update(10, ctx, PenaltyVector(rho, p.layout()));
        for (Index j = 0; j < 2; ++j) {
          CHECK(std::isfinite(out[j]));
          CHECK(out[j] > 0.0);
        }
      }
    }
  }
}
