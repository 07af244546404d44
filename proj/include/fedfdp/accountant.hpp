#ifndef FEDFDP_ACCOUNTANT_HPP
#define FEDFDP_ACCOUNTANT_HPP

#include <optional>
#include <vector>

namespace fedfdp {

// Accumulated Renyi-DP values over a fixed grid of integer orders.
// Mechanisms compose by pointwise addition over identical grids.
struct RdpCurve {
  std::vector<int> orders;
  std::vector<double> values;
};

// Integer orders 2..256. The closed-form subsampled-Gaussian bound is stated
// for integer orders, and 256 is past the useful range for these parameters.
constexpr int kMinOrder = 2;
constexpr int kMaxOrder = 256;

// Per-invocation RDP of the sampled Gaussian mechanism at integer order
// alpha: log-space evaluation of
//   (1/(alpha-1)) * ln sum_{k=0}^{alpha} C(alpha,k) (1-q)^(alpha-k) q^k
//                        exp((k^2 - k) / (2 sigma^2)).
double sgm_rdp_order(double q, double sigma, int alpha);

// The whole default grid for one invocation.
RdpCurve sgm_rdp_curve(double q, double sigma);

// T-fold self-composition: pointwise multiplication by T.
RdpCurve compose(const RdpCurve& curve, long long rounds);

// Sequential composition of two mechanisms: pointwise sum (grids must match).
RdpCurve add_curves(const RdpCurve& a, const RdpCurve& b);

struct DpResult {
  double epsilon = 0.0;
  int best_alpha = 0;
};

// (eps, delta) from an RDP curve: minimize over orders
//   R(alpha) + ln((alpha-1)/alpha) - (ln delta + ln alpha) / (alpha - 1).
DpResult rdp_to_dp(const RdpCurve& curve, double delta);

// Total privacy loss of T rounds that each release a model update (noise
// multiplier sigma) and, when sigma_l is set, a loss value (multiplier
// sigma_l), both subsampled at rate q. `extra_loss_releases` charges
// additional loss-channel invocations (e.g. an initial loss evaluation).
DpResult total_privacy_loss(double q, double sigma, std::optional<double> sigma_l, long long T,
                            double delta, long long extra_loss_releases = 0);

struct MaxRoundsResult {
  bool feasible = false;
  long long rounds = 0;
  double epsilon_at_rounds = 0.0;  // accountant floor when infeasible
};

// Largest T whose total privacy loss stays within eps_budget, found by
// exponential bracketing plus binary search (the loss is monotone in T).
MaxRoundsResult max_rounds(double eps_budget, double delta, double q, double sigma,
                           std::optional<double> sigma_l, long long extra_loss_releases = 0);

}  // namespace fedfdp

#endif  // FEDFDP_ACCOUNTANT_HPP
