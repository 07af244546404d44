#ifndef FEDFDP_PRIVACY_MECH_HPP
#define FEDFDP_PRIVACY_MECH_HPP

#include <span>

#include "fedfdp/model.hpp"
#include "fedfdp/rng.hpp"

namespace fedfdp {

struct DpNoiseSpec {
  double sigma = 0.0;           // gradient noise multiplier
  double sigma_l = 0.0;         // loss noise multiplier
  double clip_bound = 0.0;      // gradient L2 clip bound C
  double loss_bound_init = 0.0; // seed value for the adaptive loss bound
};

// Per-client adaptive clipping bound for uploaded losses. Updated once per
// round from the previous round's batch losses only.
struct LossClipState {
  int client_id = 0;
  double bound = 0.0;
};

// Lowest value the adaptive bound may take; keeps the loss mechanism
// well-defined when the noised mean goes nonpositive.
constexpr double kLossBoundFloor = 1e-6;

// Rescale g to norm <= bound, direction preserved: g / max(1, ||g||/bound).
ParamVector clip_vector(const ParamVector& g, double bound);

// Diagnostics captured while running a fair-clipping step, feeding the
// empirical convergence-bound constants.
struct StepTrace {
  double max_grad_norm = 0.0;
  double min_gap = 0.0;
  double max_gap = 0.0;
  double mean_coefficient = 0.0;  // batch-mean fair-clip coefficient
};

// One fair-clipping DPSGD step:
//   w - (eta/|B|) * (sum_j coef_j * grad_j  +  sigma * C * N(0, I)).
// Each per-sample contribution has norm <= C; noise coordinates are iid.
ParamVector fair_dpsgd_step(const ParamVector& w, const ModelSpec& model,
                            std::span<const Example> batch, double lambda,
                            double global_loss_prev, const DpNoiseSpec& noise, double eta,
                            Rng& rng, StepTrace* trace = nullptr,
                            bool allow_negative_coef = false);

// Next round's loss clip bound: the noised mean of the previous round's
// batch losses, each clamped to [0, prev bound], floored at kLossBoundFloor.
// Uses only round-(t-1) quantities, so it is post-processing for round t.
double adaptive_loss_bound(const LossClipState& prev_state,
                           std::span<const double> prev_batch_losses, double sigma_l, Rng& rng);

// Privatized mean of this round's batch losses:
//   (sum_j clamp(F_j, 0, bound) + sigma_l * bound * N(0,1)) / |B|.
double noised_loss_mean(std::span<const double> batch_losses, double bound, double sigma_l,
                        Rng& rng);

double l2_norm(const ParamVector& v);

}  // namespace fedfdp

#endif  // FEDFDP_PRIVACY_MECH_HPP
