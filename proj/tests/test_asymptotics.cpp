#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rfenchel/asymptotics.hpp"
#include "rfenchel/duality.hpp"
#include "rfenchel/rng.hpp"

using namespace rfenchel;
using namespace rfenchel::seqmodel;

TEST_CASE("h and the model expectations") {
  CHECK(h_badly(-2.0) == 0.0);
  CHECK(h_badly(0.0) == 0.0);
  CHECK(h_badly(1.0) == doctest::Approx(std::exp(1.0)).epsilon(1e-15));

  // Sandwich (*): h(xi(n)) <= E_{P_n}[f] <= h(xi(1)) + h(xi(n)), exact.
  const SequenceModel m(200);
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto xi = SequenceRule::prefixed(
        {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)}, rng.uniform(-1.0, 1.5));
    for (std::size_t n = 1; n <= 200; n += 13) {
      const double e = m.model_expectation(xi, n);
      CHECK(e >= h_badly(xi.at(n)) - 1e-15);
      CHECK(e <= h_badly(xi.at(1)) + h_badly(xi.at(n)) + 1e-15);
    }
  }
}

TEST_CASE("I on the counterexample model") {
  const SequenceModel m(1000);

  // Zero sequence.
  CHECK(I_counterexample(m, SequenceRule::constant(0.0)) == 0.0);

  // Constant c > 0: sup over n <= N is (2 - 1/N) c e^c.
  for (double c : {0.5, 1.0, 2.0}) {
    const double expect = (2.0 - 1.0 / 1000.0) * c * std::exp(c);
    CHECK(I_counterexample(m, SequenceRule::constant(c)) ==
          doctest::Approx(expect).epsilon(1e-14));
  }

  // Spike on atom 1 only: the n = 1 model charges it fully, so I = h(x).
  for (double x : {0.5, 1.5}) {
    CHECK(I_counterexample(m, SequenceRule::prefixed({x}, 0.0)) ==
          doctest::Approx(h_badly(x)).epsilon(1e-14));
  }

  // Displayed bound I <= 2 ||xi||_inf e^{||xi||_inf}.
  Rng rng(77);
  for (int t = 0; t < 40; ++t) {
    const auto xi = SequenceRule::prefixed(
        {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)},
        rng.uniform(-1.0, 1.0));
    const double sup = xi.sup_norm(m.truncation());
    CHECK(I_counterexample(m, xi) <= 2.0 * sup * std::exp(sup) + 1e-12);
  }

  // Monotone in the truncation level for nonnegative rules.
  const auto pos = SequenceRule::periodic({0.3}, {0.9, 0.1});
  double prev = -kInf;
  for (std::size_t n : {100u, 1000u, 10000u}) {
    const double v = I_counterexample(SequenceModel(n), pos);
    CHECK(v >= prev - 1e-15);
    prev = v;
  }
}

TEST_CASE("tail functional and its limit") {
  const SequenceModel m(10000);

  // limsup <= 0: the tail limit vanishes (membership in D).
  const auto dmem = SequenceRule::prefixed({2.0, 1.0}, -0.5);
  const TailLimitCheck c0 = tail_limit_check(m, dmem);
  CHECK(c0.rule_limsup_h == 0.0);
  CHECK(c0.limit_estimate <= 1e-9);
  CHECK(c0.agrees);

  // Constant 1: limit e.
  const TailLimitCheck c1 = tail_limit_check(m, SequenceRule::constant(1.0));
  CHECK(c1.rule_limsup_h == doctest::Approx(std::exp(1.0)).epsilon(1e-15));
  CHECK(c1.limit_estimate == doctest::Approx(std::exp(1.0)).epsilon(1e-6));
  CHECK(c1.agrees);

  // Alternating 0, 1, 0, 1, ...: limsup h = e as well.
  const TailLimitCheck c2 =
      tail_limit_check(m, SequenceRule::periodic({}, {0.0, 1.0}));
  CHECK(c2.limit_estimate == doctest::Approx(std::exp(1.0)).epsilon(1e-6));
  CHECK(c2.agrees);

  // The finite-truncation functional is nonincreasing in the threshold.
  const auto rule = SequenceRule::periodic({1.5}, {0.7, 0.2});
  double prev = kInf;
  for (double T : {1.0, 4.0, 16.0, 64.0, 256.0}) {
    const double v = tail_functional(m, rule, T);
    CHECK(v <= prev + 1e-15);
    prev = v;
  }
}

TEST_CASE("membership in D and the strict inclusion") {
  const SequenceModel m(10000);
  CHECK(D_membership(m, SequenceRule::constant(0.0)));
  CHECK(D_membership(m, SequenceRule::prefixed({5.0, 3.0}, -1.0)));
  CHECK(D_membership(m, SequenceRule::formula(SequenceRule::Tail::InvN, 2.0)));

  // xi = 1: not in D although I(xi) is finite -- the strict inclusion.
  const auto ones = SequenceRule::constant(1.0);
  CHECK_FALSE(D_membership(m, ones));
  CHECK(I_counterexample(m, ones) < kInf);
  CHECK(I_counterexample(m, ones) <= 2.0 * std::exp(1.0));
}

TEST_CASE("singular conjugate closed form") {
  // Zero exactly on w <= 1.
  for (double w : {0.0, 0.2, 0.7, 1.0}) CHECK(singular_conjugate(w) == 0.0);

  // Positive, matching a dense 1-D grid oracle, for w > 1.
  for (double w : {1.5, 2.0, 2.0 * std::exp(1.0), 10.0, 50.0}) {
    double brute = 0.0;
    const double xhi = std::log(w) + 1.0;
    for (int s = 0; s <= 2000000; ++s) {
      const double x = xhi * s / 2000000.0;
      brute = std::max(brute, x * (w - std::exp(x)));
    }
    const double v = singular_conjugate(w);
    CHECK(v > 0.0);
    CHECK(v == doctest::Approx(brute).epsilon(1e-10).scale(1.0));
    // Stationarity: e^x (1 + x) = w at the maximizer.
    double lo = 0.0, hi = std::log(w);
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      (std::exp(mid) * (1.0 + mid) < w ? lo : hi) = mid;
    }
    const double x = 0.5 * (lo + hi);
    CHECK(v == doctest::Approx(x * (w - std::exp(x))).epsilon(1e-12).scale(1.0));
  }

  // Monotone divergence as w grows.
  double prev = 0.0;
  for (double w = 2.0; w < 1e6; w *= 10.0) {
    const double v = singular_conjugate(w);
    CHECK(v > prev);
    prev = v;
  }
  CHECK(prev > 1e4);
}

TEST_CASE("truncation bounds bracket the singular conjugate") {
  for (double w : {0.5, 1.0, 2.0, 5.0, 10.0, 50.0}) {
    double prev_gap = kInf;
    for (std::size_t n : {100u, 1000u, 10000u}) {
      const TruncationCheck c = singular_conjugate_truncation_check(w, n);
      CHECK(c.lower <= c.closed_form + 1e-12);
      CHECK(c.upper >= c.closed_form - 1e-12);
      const double gap = c.upper - c.lower;
      CHECK(gap <= prev_gap + 1e-12);
      prev_gap = gap;
    }
    const TruncationCheck fine = singular_conjugate_truncation_check(w, 10000);
    CHECK(fine.upper - fine.lower <= 1e-4);
    if (w <= 1.0) {
      CHECK(fine.lower == 0.0);
      CHECK(fine.closed_form == 0.0);
    }
  }
}

TEST_CASE("uniform integrability scan") {
  const SequenceModel m(10000);

  // Bounded xi: the tail empties once K passes the bound.
  const UiScanReport r1 = ui_criterion_scan(m, SequenceRule::constant(1.0));
  CHECK(r1.uniformly_integrable);
  CHECK(r1.final_value == 0.0);

  // xi(n) = n: mass 1 escapes forever; the mechanism behind the example.
  const UiScanReport r2 =
      ui_criterion_scan(m, SequenceRule::formula(SequenceRule::Tail::LinearN, 1.0));
  CHECK_FALSE(r2.uniformly_integrable);
  CHECK(r2.sup_values.front() == doctest::Approx(1.0));
  CHECK(r2.final_value == doctest::Approx(1.0));

  // xi(n) = sqrt(n): tail ~ 1/K decays to zero.
  const UiScanReport r3 =
      ui_criterion_scan(m, SequenceRule::formula(SequenceRule::Tail::SqrtN, 1.0));
  CHECK(r3.uniformly_integrable);
  for (std::size_t k = 1; k < r3.sup_values.size(); ++k)
    CHECK(r3.sup_values[k] <= r3.sup_values[k - 1] + 1e-15);
}

TEST_CASE("non-UI truncation families defeat every fixed dlvp certificate") {
  // eta_n = xi * dP_n/dP with xi(n) = n, truncated: as the truncation grows,
  // sup_n E[g(|eta_n|)] diverges for any fixed coercive g.
  auto family_at = [](std::size_t N) {
    std::vector<double> w(N);
    double norm = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      w[i] = std::pow(2.0, -static_cast<double>(i + 1));
      norm += w[i];
    }
    for (auto& v : w) v /= norm;
    const SpacePtr sp = make_space(w);
    std::vector<RandomVariable> fam;
    for (std::size_t n = 2; n <= N; ++n) {
      std::vector<double> eta(N, 0.0);
      eta[0] = (1.0 - 1.0 / n) / sp->weight(0) * 1.0;  // xi(1) = 1
      eta[n - 1] = (1.0 / n) / sp->weight(n - 1) * n;  // xi(n) = n
      fam.emplace_back(sp, eta);
    }
    return fam;
  };

  // Coercive battery: each superlinear g sees an unbounded sup across
  // truncations (the de la Vallee-Poussin direction for a non-UI family).
  const std::vector<PiecewiseConvexFn> battery = {
      PiecewiseConvexFn::quadratic(1.0, 0.0, 0.0),
      PiecewiseConvexFn::quadratic(0.1, 2.0, 0.0),
  };
  for (const auto& g : battery) {
    double prev = 0.0;
    for (std::size_t N : {12u, 20u, 28u}) {
      double worst = 0.0;
      for (const auto& e : family_at(N)) {
        double s = 0.0;
        for (std::size_t i = 0; i < e.size(); ++i)
          s += e.space()->weight(i) * g.eval(std::abs(e[i])).value();
        worst = std::max(worst, s);
      }
      CHECK(worst > 2.0 * std::max(prev, 1.0));
      prev = worst;
    }
  }

  // A certificate fitted to one truncation does not transfer: its (finite,
  // piecewise-linear) bound is strictly exceeded on larger families.
  const DlvpResult base = dlvp_certificate(family_at(12));
  for (std::size_t N : {20u, 28u}) {
    double bound = 0.0;
    for (const auto& e : family_at(N)) {
      double s = 0.0;
      for (std::size_t i = 0; i < e.size(); ++i)
        s += e.space()->weight(i) * base.g.eval(std::abs(e[i])).value();
      bound = std::max(bound, s);
    }
    CHECK(bound > 2.0 * base.bound);
  }
}
