#include "fedfdp/privacy_mech.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedfdp/errors.hpp"
#include "fedfdp/fairness.hpp"

namespace fedfdp {

double l2_norm(const ParamVector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

ParamVector clip_vector(const ParamVector& g, double bound) {
  if (!(bound > 0.0)) throw ArgumentError("clip bound must be > 0");
  const double norm = l2_norm(g);
  ParamVector out = g;
  if (norm > bound) {
    const double scale = bound / norm;
    for (auto& x : out) x *= scale;
  }
  return out;
}

ParamVector fair_dpsgd_step(const ParamVector& w, const ModelSpec& model,
                            std::span<const Example> batch, double lambda,
                            double global_loss_prev, const DpNoiseSpec& noise, double eta,
                            Rng& rng, StepTrace* trace, bool allow_negative_coef) {
  if (batch.empty()) throw ArgumentError("fair_dpsgd_step: empty batch");

  ParamVector sum(w.size(), 0.0);
  double min_gap = std::numeric_limits<double>::infinity();
  double max_gap = -std::numeric_limits<double>::infinity();
  double max_norm = 0.0;
  double coef_sum = 0.0;

  for (const auto& x : batch) {
    const double gap = loss_gap(per_sample_loss(w, model, x), global_loss_prev);
    const auto grad = per_sample_grad(w, model, x);
    const double norm = l2_norm(grad);
    const double coef =
        fair_clip_coefficient(lambda, gap, noise.clip_bound, norm, allow_negative_coef);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += coef * grad[i];
    min_gap = std::min(min_gap, gap);
    max_gap = std::max(max_gap, gap);
    max_norm = std::max(max_norm, norm);
    coef_sum += coef;
  }

  for (auto& s : sum) s += noise.sigma * noise.clip_bound * rng.next_gaussian();

  const double scale = eta / static_cast<double>(batch.size());
  ParamVector out = w;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= scale * sum[i];

  if (trace) {
    trace->max_grad_norm = max_norm;
    trace->min_gap = min_gap;
    trace->max_gap = max_gap;
    trace->mean_coefficient = coef_sum / static_cast<double>(batch.size());
  }
  return out;
}

double adaptive_loss_bound(const LossClipState& prev_state,
                           std::span<const double> prev_batch_losses, double sigma_l, Rng& rng) {
  if (prev_batch_losses.empty())
    throw ArgumentError("adaptive_loss_bound: no previous-round losses");
  const double prev_bound = prev_state.bound;
  double sum = 0.0;
  for (double f : prev_batch_losses) sum += std::min(prev_bound, std::max(0.0, f));
  sum += prev_bound * sigma_l * rng.next_gaussian();
  const double mean = sum / static_cast<double>(prev_batch_losses.size());
  return std::max(mean, kLossBoundFloor);
}

double noised_loss_mean(std::span<const double> batch_losses, double bound, double sigma_l,
                        Rng& rng) {
  if (!(bound > 0.0)) throw ArgumentError("noised_loss_mean: bound must be > 0");
  if (batch_losses.empty()) throw ArgumentError("noised_loss_mean: empty batch");
  double sum = 0.0;
  for (double f : batch_losses) sum += std::min(bound, std::max(0.0, f));
  sum += sigma_l * bound * rng.next_gaussian();
  return sum / static_cast<double>(batch_losses.size());
}

}  // namespace fedfdp
