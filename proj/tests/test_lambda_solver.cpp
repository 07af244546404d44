#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fedfdp/errors.hpp"
#include "fedfdp/lambda_solver.hpp"
#include "fedfdp/rng.hpp"
#include "support/constants_gen.hpp"

using namespace fedfdp;

namespace {

// Stationarity cubic of the rational bound, straight from its coefficients.
double stationarity_cubic(const CubicCoeffs& c, double l) {
  return 2.0 * c.a1 * c.a5 * l * l * l + (3.0 * c.a1 + c.a2 * c.a5) * l * l +
         2.0 * c.a2 * l + (c.a3 - c.a4 * c.a5);
}

}  // namespace

TEST_CASE("coefficients match a hand substitution") {
  BoundConstants k;
  k.grad_bound = 2.0;
  k.smoothness = 3.0;
  k.strong_convexity = 1.0;
  k.gamma = 0.5;
  k.init_gap_sq = 4.0;
  k.q0 = 0.5;
  k.q1 = 0.5;
  k.dim = 10;
  k.min_batch = 2.0;
  k.sigma = 1.0;
  k.clip_bound = 0.1;

  const auto c = coeffs_from_constants(k);
  // a1 = G^2 Q1^3 = 4 * 0.125
  CHECK(c.a1 == doctest::Approx(0.5).epsilon(1e-15));
  // a2 = 6 G^2 Q1^2 = 6 * 4 * 0.25
  CHECK(c.a2 == doctest::Approx(6.0).epsilon(1e-15));
  // a3 = 9 Q1 G^2 + 2 L Gamma Q1 + 2 Q0 w_dist = 18 + 1.5 + 4
  CHECK(c.a3 == doctest::Approx(23.5).epsilon(1e-15));
  // a4 = 4 G^2 + 2 L Gamma + 2 sigma^2 C^2 d / B^2 + w_dist
  CHECK(c.a4 == doctest::Approx(16.0 + 3.0 + 2.0 * 0.01 * 10 / 4.0 + 4.0).epsilon(1e-12));
  // a5 = 2 Q0
  CHECK(c.a5 == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("depressed transform reproduces the cubic at sample points") {
  Rng rng(1);
  for (int rep = 0; rep < 200; ++rep) {
    const auto k = testgen::random_constants(rng);
    const auto c = coeffs_from_constants(k);
    if (c.degenerate) continue;
    const double lead = 2.0 * c.a1 * c.a5;
    for (double x : {-2.0, -0.5, 0.0, 0.7, 1.9, 5.0}) {
      const double via_depressed = (x * x + c.a6) * x + c.a7;
      const double via_original = stationarity_cubic(c, x - c.shift) / lead;
      const double scale = std::max({1.0, std::abs(via_original), std::abs(via_depressed)});
      CHECK(std::abs(via_depressed - via_original) <= 1e-9 * scale);
    }
  }
}

TEST_CASE("vanishing G degenerates the cubic") {
  Rng rng(2);
  auto k = testgen::random_constants(rng);
  k.grad_bound = 1e-300;  // effectively zero while satisfying G > 0
  const auto c = coeffs_from_constants(k);
  CHECK(c.degenerate);
}

TEST_CASE("nonpositive Q0 falls back to the grid") {
  Rng rng(3);
  auto k = testgen::random_constants(rng);
  k.q0 = -0.5;
  k.q1 = 1.0;
  CHECK(coeffs_from_constants(k).degenerate);
  const auto result = optimal_lambda(k, 100.0, 2000);
  CHECK(result.grid_fallback);
}

TEST_CASE("the discriminant identity holds for random constants") {
  Rng rng(4);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto c = coeffs_from_constants(testgen::random_constants(rng));
    if (c.degenerate) continue;
    const double b = 3.0 * c.a1 + c.a2 * c.a5;
    const double lhs = b * b - 12.0 * c.a1 * c.a2 * c.a5;
    const double diff = 3.0 * c.a1 - c.a2 * c.a5;
    const double rhs = diff * diff;
    CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(rhs)));
    CHECK(lhs >= -1e-9 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("cardano on fixed cubics") {
  SUBCASE("x^3 - 8 = 0") {
    const auto roots = cardano_real_roots(0.0, -8.0);
    REQUIRE(roots.size() == 1);
    CHECK(roots[0] == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("(x-1)(x-2)(x+3) = x^3 - 7x + 6") {
    auto roots = cardano_real_roots(-7.0, 6.0);
    REQUIRE(roots.size() == 3);
    std::sort(roots.begin(), roots.end());
    CHECK(roots[0] == doctest::Approx(-3.0).epsilon(1e-10));
    CHECK(roots[1] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(roots[2] == doctest::Approx(2.0).epsilon(1e-10));
  }
  SUBCASE("(x-1)^2(x+2) = x^3 - 3x + 2, repeated root kept") {
    auto roots = cardano_real_roots(-3.0, 2.0);
    REQUIRE(roots.size() == 3);
    std::sort(roots.begin(), roots.end());
    CHECK(roots[0] == doctest::Approx(-2.0).epsilon(1e-9));
    CHECK(roots[1] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(roots[2] == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("every returned root satisfies the residual bound") {
  Rng rng(5);
  for (int rep = 0; rep < 2000; ++rep) {
    const double a6 = 20.0 * (rng.next_double() - 0.5);
    const double a7 = 20.0 * (rng.next_double() - 0.5);
    for (double x : cardano_real_roots(a6, a7))
      CHECK(std::abs((x * x + a6) * x + a7) <= 1e-8 * std::max(1.0, std::abs(a7)));
  }
}

TEST_CASE("no interior optimum when a3 >= a4 a5") {
  Rng rng(6);
  int found = 0;
  for (int rep = 0; rep < 2000 && found < 50; ++rep) {
    const auto k = testgen::random_constants(rng);
    const auto c = coeffs_from_constants(k);
    if (c.degenerate || c.a3 < c.a4 * c.a5) continue;
    ++found;
    const auto result = optimal_lambda(k, 50.0, 2000);
    CHECK(result.lambda_star == 0.0);
    CHECK_FALSE(result.interior);
    CHECK(result.p_min == doctest::Approx(bound_value(k, 50.0, 0.0)).epsilon(1e-12));
  }
  REQUIRE(found > 0);
}

TEST_CASE("closed form agrees with the grid oracle on feasible constants") {
  Rng rng(7);
  for (int rep = 0; rep < 30; ++rep) {
    const auto k = testgen::random_feasible_constants(rng);
    const auto result = optimal_lambda(k, 100.0);  // internal guard also applies
    CHECK(result.interior);
    CHECK(result.lambda_star > 0.0);

    // External coarse grid: the closed-form minimum can be no worse.
    const double hi = 10.0 * result.lambda_star + 1.0;
    double grid_best = bound_value(k, 100.0, 0.0);
    for (int i = 1; i <= 10000; ++i) {
      const double l = hi * i / 10000.0;
      grid_best = std::min(grid_best, bound_value(k, 100.0, l));
    }
    CHECK(result.p_min <= grid_best + 1e-6);
  }
}

TEST_CASE("exactly one positive stationary point on feasible constants") {
  Rng rng(8);
  for (int rep = 0; rep < 50; ++rep) {
    const auto k = testgen::random_feasible_constants(rng);
    const auto result = optimal_lambda(k, 10.0);
    int positive = 0;
    for (double r : result.roots)
      if (r > 0.0) ++positive;
    CHECK(positive == 1);
  }
}

TEST_CASE("the bound is unimodal around the optimum") {
  Rng rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    const auto k = testgen::random_feasible_constants(rng);
    const auto result = optimal_lambda(k, 10.0);
    const double star = result.lambda_star;
    for (int i = 0; i < 100; ++i) {
      const double left_a = star * i / 101.0;
      const double left_b = star * (i + 1) / 101.0;
      CHECK(bound_value(k, 10.0, left_a) >= bound_value(k, 10.0, left_b) - 1e-9);
      const double right_a = star * (1.0 + i * 0.05);
      const double right_b = star * (1.0 + (i + 1) * 0.05);
      CHECK(bound_value(k, 10.0, right_b) >= bound_value(k, 10.0, right_a) - 1e-9);
    }
  }
}

TEST_CASE("shifted roots match a direct numeric scan of the cubic") {
  Rng rng(10);
  for (int rep = 0; rep < 20; ++rep) {
    const auto k = testgen::random_feasible_constants(rng);
    const auto c = coeffs_from_constants(k);
    const auto result = optimal_lambda(k, 10.0);
    // Any sign change of the stationarity cubic must be near a returned root.
    const double span = 5.0 * (std::abs(result.lambda_star) + 1.0);
    double prev_l = -span;
    double prev_v = stationarity_cubic(c, prev_l);
    for (int i = 1; i <= 20000; ++i) {
      const double l = -span + 2.0 * span * i / 20000.0;
      const double v = stationarity_cubic(c, l);
      if (prev_v == 0.0 || (prev_v < 0.0) != (v < 0.0)) {
        // Bisect for the crossing.
        double lo = prev_l, hi = l;
        for (int it = 0; it < 80; ++it) {
          const double mid = 0.5 * (lo + hi);
          if ((stationarity_cubic(c, mid) < 0.0) == (prev_v < 0.0))
            lo = mid;
          else
            hi = mid;
        }
        const double crossing = 0.5 * (lo + hi);
        double best = 1e300;
        for (double r : result.roots) best = std::min(best, std::abs(r - crossing));
        CHECK(best <= 1e-8 * std::max(1.0, std::abs(crossing)));
      }
      prev_l = l;
      prev_v = v;
    }
  }
}

TEST_CASE("convergence bound scales as 1/t") {
  Rng rng(11);
  const auto k = testgen::random_constants(rng);
  const auto at_t = convergence_bound(k, 1.0, 7.0);
  const auto at_2t = convergence_bound(k, 1.0, 14.0);
  REQUIRE(at_t.has_value());
  REQUIRE(at_2t.has_value());
  CHECK(*at_2t == doctest::Approx(*at_t / 2.0).epsilon(1e-12));
}

TEST_CASE("removing the noise deletes exactly one term") {
  Rng rng(12);
  auto k = testgen::random_constants(rng);
  k.sigma = 1.7;
  const double coef = 1.2, t = 5.0;
  auto noisy = convergence_bound(k, coef, t);
  auto quiet_k = k;
  quiet_k.sigma = 0.0;
  auto quiet = convergence_bound(quiet_k, coef, t);
  REQUIRE(noisy.has_value());
  REQUIRE(quiet.has_value());
  const double noise_term = 2.0 * k.sigma * k.sigma * k.clip_bound * k.clip_bound * k.dim /
                            (k.min_batch * k.min_batch);
  const double mu2 = k.strong_convexity * k.strong_convexity;
  const double want_diff =
      k.smoothness / (2.0 * t) * noise_term / (mu2 * (2.0 * coef - 1.0));
  CHECK(*noisy - *quiet == doctest::Approx(want_diff).epsilon(1e-9));
}

TEST_CASE("convergence bound matches an independent transcription") {
  Rng rng(13);
  for (int rep = 0; rep < 200; ++rep) {
    const auto k = testgen::random_constants(rng);
    const double coef = 0.6 + 2.0 * rng.next_double();
    const double t = 1.0 + 50.0 * rng.next_double();
    const auto got = convergence_bound(k, coef, t);
    const double g2 = k.grad_bound * k.grad_bound;
    const double a = g2 * coef * coef * coef + 3.0 * g2 * coef * coef +
                     2.0 * k.smoothness * k.gamma * coef +
                     2.0 * k.sigma * k.sigma * k.clip_bound * k.clip_bound * k.dim /
                         (k.min_batch * k.min_batch);
    if (2.0 * coef <= 1.0) {
      CHECK_FALSE(got.has_value());
    } else {
      const double want =
          (k.smoothness / (2.0 * t)) *
          (a / (k.strong_convexity * k.strong_convexity * (2.0 * coef - 1.0)) +
           k.init_gap_sq);
      REQUIRE(got.has_value());
      CHECK(*got == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("bound is infeasible when 2 C_t <= 1") {
  Rng rng(14);
  const auto k = testgen::random_constants(rng);
  CHECK_FALSE(convergence_bound(k, 0.5, 3.0).has_value());
  CHECK_FALSE(convergence_bound(k, 0.2, 3.0).has_value());
}

TEST_CASE("one-iteration recursion") {
  Rng rng(15);
  const auto k = testgen::random_constants(rng);
  const double gap = 3.7;
  CHECK(one_iteration_bound(k, 1.1, 0.0, gap) == doctest::Approx(gap).epsilon(1e-15));

  const double eta = 0.03;
  const double g2 = k.grad_bound * k.grad_bound;
  const double coef = 1.1;
  const double a = g2 * coef * coef * coef + 3.0 * g2 * coef * coef +
                   2.0 * k.smoothness * k.gamma * coef +
                   2.0 * k.sigma * k.sigma * k.clip_bound * k.clip_bound * k.dim /
                       (k.min_batch * k.min_batch);
  CHECK(one_iteration_bound(k, coef, eta, 0.0) == doctest::Approx(eta * eta * a).epsilon(1e-12));
  CHECK(one_iteration_bound(k, coef, eta, gap) ==
        doctest::Approx((1.0 - k.strong_convexity * eta * coef) * gap + eta * eta * a)
            .epsilon(1e-12));
}

TEST_CASE("estimate_constants passes analytic values through") {
  RunTrace trace;
  trace.max_grad_norm = 2.5;
  trace.min_gap = -0.3;
  trace.max_gap = 1.1;
  trace.min_batch = 4;
  trace.client_opt_losses = {0.5, 0.7};
  trace.weights = {0.5, 0.5};
  trace.global_opt_loss = 0.9;
  trace.init_gap_sq = 3.0;
  trace.analytic_smoothness = 1.0;
  trace.analytic_strong_convexity = 1.0;
  trace.param_dim = 6;
  trace.sigma = 0.5;
  trace.clip_bound = 0.1;

  const auto est = estimate_constants(trace);
  CHECK(est.constants.grad_bound == 2.5);
  CHECK(est.constants.q0 == -0.3);
  CHECK(est.constants.q1 == 1.1);
  CHECK(est.constants.smoothness == 1.0);
  CHECK(est.constants.strong_convexity == 1.0);
  CHECK(est.constants.gamma == doctest::Approx(0.9 - 0.6).epsilon(1e-12));
  CHECK(est.constants.min_batch == 4.0);
  bool analytic_l = false;
  for (const auto& p : est.provenance) analytic_l |= p == "L: analytic";
  CHECK(analytic_l);
}

TEST_CASE("estimate_constants rejects an insufficient trace") {
  RunTrace empty;
  CHECK_THROWS_AS(estimate_constants(empty), ArgumentError);

  // Strong convexity cannot be read off a trace; it must be supplied.
  RunTrace no_mu;
  no_mu.max_grad_norm = 1.0;
  no_mu.min_gap = -0.1;
  no_mu.max_gap = 0.2;
  no_mu.min_batch = 2;
  no_mu.client_opt_losses = {0.5};
  no_mu.weights = {1.0};
  no_mu.global_opt_loss = 0.5;
  no_mu.init_gap_sq = 1.0;
  no_mu.max_feature_sq_norm = 4.0;
  no_mu.param_dim = 3;
  CHECK_THROWS_AS(estimate_constants(no_mu), ArgumentError);

  // With mu supplied, the smoothness falls back to the Hessian bound.
  no_mu.analytic_strong_convexity = 0.1;
  const auto est = estimate_constants(no_mu);
  CHECK(est.constants.smoothness == doctest::Approx(0.5 * 5.0).epsilon(1e-15));
}
