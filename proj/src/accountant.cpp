#include "fedfdp/accountant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedfdp/errors.hpp"

namespace fedfdp {

namespace {

double log_binomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double log_sum_exp(const std::vector<double>& terms) {
  double m = -std::numeric_limits<double>::infinity();
  for (double t : terms) m = std::max(m, t);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

void check_params(double q, double sigma) {
  if (q < 0.0 || q > 1.0) throw ArgumentError("sampling ratio q must lie in [0, 1]");
  if (!(sigma > 0.0)) throw ArgumentError("noise multiplier must be > 0");
}

}  // namespace

double sgm_rdp_order(double q, double sigma, int alpha) {
  check_params(q, sigma);
  if (alpha < kMinOrder) throw ArgumentError("order alpha must be an integer >= 2");
  if (q == 0.0) return 0.0;
  if (q == 1.0) return alpha / (2.0 * sigma * sigma);  // ln A = (alpha^2 - alpha) / (2 sigma^2)

  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  std::vector<double> terms(alpha + 1);
  for (int k = 0; k <= alpha; ++k) {
    terms[k] = log_binomial(alpha, k) + (alpha - k) * log_1mq + k * log_q +
               (static_cast<double>(k) * k - k) / (2.0 * sigma * sigma);
  }
  const double log_a = log_sum_exp(terms);
  if (!std::isfinite(log_a))
    throw NumericError("sgm_rdp_order overflowed at alpha=" + std::to_string(alpha));
  // A_alpha >= 1, so the result is nonnegative up to rounding.
  return std::max(0.0, log_a / (alpha - 1));
}

RdpCurve sgm_rdp_curve(double q, double sigma) {
  RdpCurve curve;
  curve.orders.reserve(kMaxOrder - kMinOrder + 1);
  curve.values.reserve(kMaxOrder - kMinOrder + 1);
  for (int alpha = kMinOrder; alpha <= kMaxOrder; ++alpha) {
    curve.orders.push_back(alpha);
    curve.values.push_back(sgm_rdp_order(q, sigma, alpha));
  }
  return curve;
}

RdpCurve compose(const RdpCurve& curve, long long rounds) {
  if (rounds < 0) throw ArgumentError("compose: rounds must be >= 0");
  RdpCurve out = curve;
  for (auto& v : out.values) v *= static_cast<double>(rounds);
  return out;
}

RdpCurve add_curves(const RdpCurve& a, const RdpCurve& b) {
  if (a.orders != b.orders) throw ArgumentError("add_curves: order grids differ");
  RdpCurve out = a;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += b.values[i];
  return out;
}

DpResult rdp_to_dp(const RdpCurve& curve, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ArgumentError("delta must lie in (0, 1)");
  if (curve.orders.empty()) throw ArgumentError("rdp_to_dp: empty curve");
  DpResult best{std::numeric_limits<double>::infinity(), 0};
  for (std::size_t i = 0; i < curve.orders.size(); ++i) {
    const double alpha = curve.orders[i];
    const double eps = curve.values[i] + std::log((alpha - 1.0) / alpha) -
                       (std::log(delta) + std::log(alpha)) / (alpha - 1.0);
    if (eps < best.epsilon) {
      best.epsilon = eps;
      best.best_alpha = curve.orders[i];
    }
  }
  return best;
}

DpResult total_privacy_loss(double q, double sigma, std::optional<double> sigma_l, long long T,
                            double delta, long long extra_loss_releases) {
  if (T < 0) throw ArgumentError("rounds T must be >= 0");
  RdpCurve total = compose(sgm_rdp_curve(q, sigma), T);
  if (sigma_l) {
    const RdpCurve loss = sgm_rdp_curve(q, *sigma_l);
    total = add_curves(total, compose(loss, T + extra_loss_releases));
  }
  return rdp_to_dp(total, delta);
}

MaxRoundsResult max_rounds(double eps_budget, double delta, double q, double sigma,
                           std::optional<double> sigma_l, long long extra_loss_releases) {
  const auto eps_at = [&](long long T) {
    return total_privacy_loss(q, sigma, sigma_l, T, delta, extra_loss_releases).epsilon;
  };
  const double floor = eps_at(0);
  if (floor > eps_budget) return {false, 0, floor};

  // Exponential bracket, then binary search on the monotone eps(T).
  long long lo = 0, hi = 1;
  while (eps_at(hi) <= eps_budget) {
    lo = hi;
    if (hi > (1LL << 40)) throw NumericError("max_rounds: budget appears unbounded");
    hi *= 2;
  }
  while (hi - lo > 1) {
    const long long mid = lo + (hi - lo) / 2;
    if (eps_at(mid) <= eps_budget)
      lo = mid;
    else
      hi = mid;
  }
  return {true, lo, eps_at(lo)};
}

}  // namespace fedfdp
