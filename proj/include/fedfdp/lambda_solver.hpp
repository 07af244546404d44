#ifndef FEDFDP_LAMBDA_SOLVER_HPP
#define FEDFDP_LAMBDA_SOLVER_HPP

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace fedfdp {

// Constants feeding the convergence upper bound and the fairness-parameter
// solver. Gamma measures data heterogeneity (0 in the IID limit); Q0/Q1
// bracket the per-sample loss gaps seen in training.
struct BoundConstants {
  double grad_bound = 0.0;     // G
  double smoothness = 0.0;     // L
  double strong_convexity = 0; // mu
  double gamma = 0.0;          // Gamma = F* - sum_i p_i F_i*
  double init_gap_sq = 0.0;    // E || w_1 - w* ||^2
  double q0 = 0.0;             // lower bound on loss gaps
  double q1 = 0.0;             // upper bound on loss gaps
  int dim = 0;                 // d
  double min_batch = 1.0;      // B-hat
  double sigma = 0.0;          // gradient noise multiplier
  double clip_bound = 0.0;     // C
};

// Cubic data for the bound-minimization problem. a1..a5 define
//   P(lambda) ~ (a1 l^3 + a2 l^2 + a3 l + a4) / (a5 l + 1),
// whose stationary points are the roots of a cubic; a6/a7 are that cubic's
// depressed form x^3 + a6 x + a7 after the shift lambda = x - shift.
struct CubicCoeffs {
  double a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0;
  double a6 = 0, a7 = 0;
  double shift = 0;
  bool degenerate = false;  // a1 or a5 vanishes; use grid search instead
};

CubicCoeffs coeffs_from_constants(const BoundConstants& k);

// All real roots of x^3 + a6 x + a7 (duplicates kept for repeated roots).
// Each returned root satisfies |x^3 + a6 x + a7| <= 1e-8 * max(1, |a7|).
std::vector<double> cardano_real_roots(double a6, double a7);

// The bound value P(lambda) at T rounds.
double bound_value(const BoundConstants& k, double rounds, double lambda);

struct LambdaResult {
  double lambda_star = 0.0;
  double p_min = 0.0;
  std::vector<double> roots;     // real stationary points, in lambda space
  bool interior = false;         // an interior optimum exists (a3 < a4 a5)
  bool grid_fallback = false;    // closed form degenerate; grid search used
};

// Optimal fairness parameter: the positive real root of the stationarity
// cubic when one exists, cross-checked against a grid + golden-section
// minimization (disagreement raises NumericError with both candidates).
LambdaResult optimal_lambda(const BoundConstants& k, double rounds, int guard_grid = 10000);

// Convergence upper bound after t rounds for a representative mean clipping
// coefficient C_t. Empty when 2*C_t <= 1 (bound undefined).
std::optional<double> convergence_bound(const BoundConstants& k, double mean_coef, double t);

// One-iteration recursion overlay: (1 - mu*eta*C_t) * gap + eta^2 * A.
double one_iteration_bound(const BoundConstants& k, double mean_coef, double eta,
                           double current_gap);

// Observations from a training run, for estimating BoundConstants when they
// are not known analytically.
struct RunTrace {
  double max_grad_norm = 0.0;
  double min_gap = std::numeric_limits<double>::infinity();
  double max_gap = -std::numeric_limits<double>::infinity();
  long long min_batch = std::numeric_limits<long long>::max();
  double mean_clip_coef = 1.0;
  std::vector<double> client_opt_losses;  // long-run per-client minima
  std::vector<double> weights;
  double global_opt_loss = std::numeric_limits<double>::quiet_NaN();
  double init_gap_sq = std::numeric_limits<double>::quiet_NaN();
  double max_feature_sq_norm = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> analytic_smoothness;
  std::optional<double> analytic_strong_convexity;
  int param_dim = 0;
  double sigma = 0.0;
  double clip_bound = 0.0;
};

struct EstimatedConstants {
  BoundConstants constants;
  std::vector<std::string> provenance;  // "G: empirical (...)", "L: analytic", ...
};

EstimatedConstants estimate_constants(const RunTrace& trace);

}  // namespace fedfdp

#endif  // FEDFDP_LAMBDA_SOLVER_HPP
