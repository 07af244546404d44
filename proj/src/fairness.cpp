#include "fedfdp/fairness.hpp"

#include <algorithm>
#include <cmath>

#include "fedfdp/errors.hpp"

namespace fedfdp {

namespace {
void check_report(const LossReport& report) {
  if (report.losses.size() != report.weights.size())
    throw ArgumentError("loss report: losses and weights differ in length");
  if (report.losses.empty()) throw ArgumentError("loss report: empty");
  double sum = 0.0;
  for (double w : report.weights) sum += w;
  if (std::abs(sum - 1.0) > 1e-9) throw ArgumentError("loss report: weights do not sum to 1");
}
}  // namespace

double global_loss(const LossReport& report) {
  check_report(report);
  double acc = 0.0;
  for (std::size_t i = 0; i < report.losses.size(); ++i)
    acc += report.weights[i] * report.losses[i];
  return acc;
}

double psi(const LossReport& report) {
  const double mean = global_loss(report);
  double acc = 0.0;
  for (std::size_t i = 0; i < report.losses.size(); ++i) {
    const double dev = report.losses[i] - mean;
    acc += report.weights[i] * dev * dev;
  }
  return acc;
}

double loss_gap(double local_loss, double global_loss_prev) {
  return local_loss - global_loss_prev;
}

double dynamic_lr(double eta, double lambda, double gap) {
  return eta * (1.0 + lambda * gap);
}

double fair_clip_coefficient(double lambda, double gap, double clip_bound, double grad_norm,
                             bool allow_negative) {
  const double amplifier = 1.0 + lambda * gap;
  double coef = (grad_norm > 0.0) ? std::min(amplifier, clip_bound / grad_norm) : amplifier;
  if (!allow_negative) coef = std::max(coef, 0.0);
  return coef;
}

}  // namespace fedfdp
