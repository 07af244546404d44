#ifndef FEDFDP_FAIRNESS_HPP
#define FEDFDP_FAIRNESS_HPP

#include <vector>

namespace fedfdp {

// Per-client losses with their aggregation weights p_i (weights sum to 1).
struct LossReport {
  std::vector<double> losses;
  std::vector<double> weights;
};

// Weighted global loss: sum_i p_i * F_i.
double global_loss(const LossReport& report);

// Fairness metric: the p-weighted variance of per-client losses around the
// global loss. Zero iff every client sees the same loss.
double psi(const LossReport& report);

// Loss gap of a client (or sample) against the broadcast global loss.
double loss_gap(double local_loss, double global_loss_prev);

// Dynamic learning rate eta * (1 + lambda * gap). Deliberately unclamped:
// a strongly negative gap can reverse the step.
double dynamic_lr(double eta, double lambda, double gap);

// Per-sample scale combining the fairness amplifier with the DP clipping
// cap: min(1 + lambda*gap, C / ||g||), floored at zero unless
// `allow_negative` is set. A zero gradient norm leaves only the amplifier.
// The product coefficient * grad_norm never exceeds `clip_bound`.
double fair_clip_coefficient(double lambda, double gap, double clip_bound, double grad_norm,
                             bool allow_negative = false);

}  // namespace fedfdp

#endif  // FEDFDP_FAIRNESS_HPP
