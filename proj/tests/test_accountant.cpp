#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fedfdp/accountant.hpp"
#include "fedfdp/errors.hpp"
#include "fedfdp/rng.hpp"
#include "support/oracles.hpp"

using namespace fedfdp;

TEST_CASE("zero sampling ratio leaks nothing") {
  for (int alpha : {2, 7, 64, 256}) CHECK(sgm_rdp_order(0.0, 1.0, alpha) == 0.0);
}

TEST_CASE("q = 1 collapses to the plain Gaussian mechanism") {
  for (double sigma : {0.5, 1.0, 2.0, 5.0})
    for (int alpha = 2; alpha <= 64; ++alpha)
      CHECK(sgm_rdp_order(1.0, sigma, alpha) ==
            doctest::Approx(alpha / (2.0 * sigma * sigma)).epsilon(1e-9));
}

TEST_CASE("log-space evaluation matches the 320-bit brute-force sum") {
  // A handful here; the full 50-triple sweep runs in the acceptance suite.
  Rng rng(1);
  for (int rep = 0; rep < 10; ++rep) {
    const double q = 0.001 + 0.199 * rng.next_double();
    const double sigma = 0.5 + 4.5 * rng.next_double();
    const int alpha = 2 + static_cast<int>(rng.next_u64() % 127);
    const double got = sgm_rdp_order(q, sigma, alpha);
    const double want = oracles::sgm_rdp(q, sigma, alpha);
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("rdp order value is monotone in sigma, q and alpha") {
  Rng rng(2);
  for (int rep = 0; rep < 300; ++rep) {
    const double q = 0.01 + 0.5 * rng.next_double();
    const double sigma = 0.5 + 3.0 * rng.next_double();
    const int alpha = 2 + static_cast<int>(rng.next_u64() % 100);
    const double base = sgm_rdp_order(q, sigma, alpha);
    CHECK(sgm_rdp_order(q, sigma * 1.3, alpha) <= base + 1e-12);
    CHECK(sgm_rdp_order(std::min(1.0, q * 1.3), sigma, alpha) >= base - 1e-12);
    CHECK(sgm_rdp_order(q, sigma, alpha + 1) >= base - 1e-12);
  }
}

TEST_CASE("composition scales the curve") {
  const auto curve = sgm_rdp_curve(0.05, 2.0);
  const auto zero = compose(curve, 0);
  for (double v : zero.values) CHECK(v == 0.0);
  CHECK(compose(curve, 1).values == curve.values);
  const auto many = compose(curve, 268);
  for (std::size_t i = 0; i < curve.values.size(); ++i)
    CHECK(many.values[i] == doctest::Approx(268.0 * curve.values[i]).epsilon(1e-15));
}

TEST_CASE("composition is additive over round splits") {
  const auto curve = sgm_rdp_curve(0.05, 1.5);
  const auto split = add_curves(compose(curve, 100), compose(curve, 23));
  const auto joint = compose(curve, 123);
  for (std::size_t i = 0; i < curve.values.size(); ++i)
    CHECK(split.values[i] == doctest::Approx(joint.values[i]).epsilon(1e-12));
}

TEST_CASE("curve addition") {
  const auto a = sgm_rdp_curve(0.05, 2.0);
  auto zero = a;
  for (auto& v : zero.values) v = 0.0;
  CHECK(add_curves(a, zero).values == a.values);
  const auto doubled = add_curves(a, a);
  for (std::size_t i = 0; i < a.values.size(); ++i)
    CHECK(doubled.values[i] == doctest::Approx(2.0 * a.values[i]).epsilon(1e-15));

  const auto model = sgm_rdp_curve(0.05, 2.0);
  const auto loss = sgm_rdp_curve(0.05, 5.0);
  const auto both = add_curves(model, loss);
  for (std::size_t i = 0; i < model.values.size(); ++i)
    CHECK(both.values[i] ==
          doctest::Approx(model.values[i] + loss.values[i]).epsilon(1e-15));

  RdpCurve mismatched{{2, 3}, {0.0, 0.0}};
  CHECK_THROWS_AS(add_curves(a, mismatched), ArgumentError);
}

TEST_CASE("rdp to dp conversion at a single order") {
  const RdpCurve curve{{2}, {1.0}};
  const double want = 1.0 + std::log(0.5) - (std::log(1e-5) + std::log(2.0));
  const auto r = rdp_to_dp(curve, 1e-5);
  CHECK(r.epsilon == doctest::Approx(want).epsilon(1e-12));
  CHECK(r.epsilon == doctest::Approx(11.12663).epsilon(1e-5));
  CHECK(r.best_alpha == 2);
}

TEST_CASE("conversion is monotone in the curve and in delta") {
  const auto base = compose(sgm_rdp_curve(0.05, 2.0), 100);
  auto larger = base;
  for (auto& v : larger.values) v += 0.1;
  CHECK(rdp_to_dp(larger, 1e-5).epsilon > rdp_to_dp(base, 1e-5).epsilon);
  // Larger delta relaxes epsilon toward the delta-free terms.
  CHECK(rdp_to_dp(base, 1e-3).epsilon < rdp_to_dp(base, 1e-5).epsilon);
}

TEST_CASE("conversion result is the grid minimum") {
  const auto curve = compose(sgm_rdp_curve(0.05, 2.0), 268);
  const auto best = rdp_to_dp(curve, 1e-5);
  for (std::size_t i = 0; i < curve.orders.size(); ++i) {
    const double alpha = curve.orders[i];
    const double at_order = curve.values[i] + std::log((alpha - 1.0) / alpha) -
                            (std::log(1e-5) + std::log(alpha)) / (alpha - 1.0);
    CHECK(best.epsilon <= at_order + 1e-12);
  }
}

TEST_CASE("loss channel composition behaves in the limits") {
  const auto grad_only = total_privacy_loss(0.05, 2.0, std::nullopt, 100, 1e-5);
  const auto with_huge_sigma_l = total_privacy_loss(0.05, 2.0, 1e6, 100, 1e-5);
  CHECK(with_huge_sigma_l.epsilon ==
        doctest::Approx(grad_only.epsilon).epsilon(1e-4));
  const auto with_loss = total_privacy_loss(0.05, 2.0, 5.0, 100, 1e-5);
  CHECK(with_loss.epsilon > grad_only.epsilon);
}

TEST_CASE("T = 0 reports the conversion floor") {
  const auto r = total_privacy_loss(0.05, 2.0, 5.0, 0, 1e-5);
  CHECK(r.epsilon > 0.0);
  CHECK(r.epsilon < 0.1);  // small but nonzero on the integer grid
  RdpCurve zero = sgm_rdp_curve(0.05, 2.0);
  for (auto& v : zero.values) v = 0.0;
  CHECK(r.epsilon == doctest::Approx(rdp_to_dp(zero, 1e-5).epsilon).epsilon(1e-12));
}

TEST_CASE("extra loss releases are charged") {
  const auto bare = total_privacy_loss(0.05, 2.0, 5.0, 50, 1e-5, 0);
  const auto charged = total_privacy_loss(0.05, 2.0, 5.0, 50, 1e-5, 1);
  CHECK(charged.epsilon > bare.epsilon);
}

TEST_CASE("max_rounds round trip") {
  for (double eps : {0.5, 2.0, 3.52}) {
    const auto mr = max_rounds(eps, 1e-5, 0.05, 2.0, 5.0);
    REQUIRE(mr.feasible);
    CHECK(total_privacy_loss(0.05, 2.0, 5.0, mr.rounds, 1e-5).epsilon <= eps);
    CHECK(total_privacy_loss(0.05, 2.0, 5.0, mr.rounds + 1, 1e-5).epsilon > eps);
  }
}

TEST_CASE("budget just above the floor supports zero rounds") {
  const double floor = total_privacy_loss(0.05, 2.0, std::nullopt, 0, 1e-5).epsilon;
  const auto mr = max_rounds(floor * 1.0000001, 1e-5, 0.05, 2.0, std::nullopt);
  // One round at sigma=2 costs far more than the margin above the floor.
  CHECK(mr.feasible);
  CHECK(mr.rounds == 0);
}

TEST_CASE("budget below the floor is infeasible") {
  const auto mr = max_rounds(1e-4, 1e-5, 0.05, 2.0, std::nullopt);
  CHECK_FALSE(mr.feasible);
  CHECK(mr.epsilon_at_rounds > 1e-4);
}

TEST_CASE("doubling sigma never reduces the round budget") {
  for (double sigma : {0.8, 1.0, 1.7, 2.0}) {
    const auto lo = max_rounds(2.0, 1e-5, 0.05, sigma, std::nullopt);
    const auto hi = max_rounds(2.0, 1e-5, 0.05, 2.0 * sigma, std::nullopt);
    REQUIRE(lo.feasible);
    REQUIRE(hi.feasible);
    CHECK(hi.rounds >= lo.rounds);
  }
}

TEST_CASE("argument validation") {
  CHECK_THROWS_AS(sgm_rdp_order(-0.1, 1.0, 2), ArgumentError);
  CHECK_THROWS_AS(sgm_rdp_order(0.5, 0.0, 2), ArgumentError);
  CHECK_THROWS_AS(sgm_rdp_order(0.5, 1.0, 1), ArgumentError);
  CHECK_THROWS_AS(compose(sgm_rdp_curve(0.1, 1.0), -1), ArgumentError);
  CHECK_THROWS_AS(rdp_to_dp(RdpCurve{}, 0.5), ArgumentError);
  CHECK_THROWS_AS(rdp_to_dp(sgm_rdp_curve(0.1, 1.0), 0.0), ArgumentError);
}
