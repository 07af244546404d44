#include "fedfdp/lambda_solver.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <sstream>

#include "fedfdp/errors.hpp"

namespace fedfdp {

namespace {

double noise_term(const BoundConstants& k) {
  return 2.0 * k.sigma * k.sigma * k.clip_bound * k.clip_bound * k.dim /
         (k.min_batch * k.min_batch);
}

void check_constants(const BoundConstants& k) {
  if (!(k.strong_convexity > 0.0) || k.smoothness < k.strong_convexity)
    throw ArgumentError("bound constants require L >= mu > 0");
  if (!(k.grad_bound > 0.0)) throw ArgumentError("bound constants require G > 0");
  if (k.min_batch < 1.0) throw ArgumentError("bound constants require B_hat >= 1");
  if (k.q0 > k.q1) throw ArgumentError("bound constants require Q0 <= Q1");
}

// Rational objective F(l) = (a1 l^3 + a2 l^2 + a3 l + a4) / (a5 l + 1).
double rational_part(const CubicCoeffs& c, double l) {
  return (((c.a1 * l + c.a2) * l + c.a3) * l + c.a4) / (c.a5 * l + 1.0);
}

// Grid scan plus golden-section refinement of a unimodal-ish objective.
std::pair<double, double> grid_golden_min(const std::function<double(double)>& f, double lo,
                                          double hi, int grid_points) {
  double best_x = lo, best_v = f(lo);
  const double step = (hi - lo) / std::max(1, grid_points - 1);
  for (int i = 1; i < grid_points; ++i) {
    const double x = lo + i * step;
    const double v = f(x);
    if (v < best_v) {
      best_v = v;
      best_x = x;
    }
  }
  double a = std::max(lo, best_x - step), b = std::min(hi, best_x + step);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c1 = b - inv_phi * (b - a), c2 = a + inv_phi * (b - a);
  double f1 = f(c1), f2 = f(c2);
  while (b - a > 1e-12 * std::max(1.0, std::abs(b))) {
    if (f1 < f2) {
      b = c2;
      c2 = c1;
      f2 = f1;
      c1 = b - inv_phi * (b - a);
      f1 = f(c1);
    } else {
      a = c1;
      c1 = c2;
      f1 = f2;
      c2 = a + inv_phi * (b - a);
      f2 = f(c2);
    }
  }
  const double x = 0.5 * (a + b);
  const double v = f(x);
  return v < best_v ? std::make_pair(x, v) : std::make_pair(best_x, best_v);
}

}  // namespace

CubicCoeffs coeffs_from_constants(const BoundConstants& k) {
  check_constants(k);
  const double g2 = k.grad_bound * k.grad_bound;
  CubicCoeffs c;
  c.a1 = g2 * k.q1 * k.q1 * k.q1;
  c.a2 = 6.0 * g2 * k.q1 * k.q1;
  c.a3 = 9.0 * k.q1 * g2 + 2.0 * k.smoothness * k.gamma * k.q1 + 2.0 * k.q0 * k.init_gap_sq;
  c.a4 = 4.0 * g2 + 2.0 * k.smoothness * k.gamma + noise_term(k) + k.init_gap_sq;
  c.a5 = 2.0 * k.q0;

  // The closed form divides by a1*a5; a nonpositive a5 also breaks the
  // positivity argument behind the unique-positive-root claim.
  if (c.a1 <= 0.0 || c.a5 <= 0.0) {
    c.degenerate = true;
    return c;
  }

  const double b = 3.0 * c.a1 + c.a2 * c.a5;
  c.shift = b / (6.0 * c.a1 * c.a5);
  const double diff = 3.0 * c.a1 - c.a2 * c.a5;
  c.a6 = -(diff * diff) / (12.0 * c.a1 * c.a1 * c.a5 * c.a5);
  c.a7 = (108.0 * c.a1 * c.a1 * c.a5 * c.a5 * (c.a3 - c.a4 * c.a5) -
          36.0 * (c.a1 * c.a2 * c.a5) * b + 2.0 * b * b * b) /
         (216.0 * c.a1 * c.a1 * c.a1 * c.a5 * c.a5 * c.a5);
  return c;
}

std::vector<double> cardano_real_roots(double a6, double a7) {
  using cplx = std::complex<double>;
  const cplx disc = cplx(a7 * a7 / 4.0 + a6 * a6 * a6 / 27.0, 0.0);
  const cplx s = std::sqrt(disc);
  const cplx u_cubed = cplx(-a7 / 2.0, 0.0) + s;
  const cplx v_cubed = cplx(-a7 / 2.0, 0.0) - s;

  cplx u = std::pow(u_cubed, 1.0 / 3.0);
  cplx v;
  if (std::abs(u) > 1e-300) {
    v = cplx(-a6 / 3.0, 0.0) / u;  // enforce u*v = -a6/3 (branch pairing)
  } else {
    u = cplx(0.0, 0.0);
    v = std::pow(v_cubed, 1.0 / 3.0);
  }

  const cplx omega(-0.5, std::sqrt(3.0) / 2.0);
  const cplx candidates[3] = {u + v, omega * u + omega * omega * v,
                              omega * omega * u + omega * v};

  const double residual_tol = 1e-8 * std::max(1.0, std::abs(a7));
  std::vector<double> roots;
  for (const auto& z : candidates) {
    if (std::abs(z.imag()) >= 1e-9 * std::max(1.0, std::abs(z))) continue;
    double x = z.real();
    // Newton polish; repeated roots converge slowly but start close enough.
    for (int it = 0; it < 4; ++it) {
      const double fx = (x * x + a6) * x + a7;
      const double dfx = 3.0 * x * x + a6;
      if (std::abs(fx) <= residual_tol || std::abs(dfx) < 1e-300) break;
      x -= fx / dfx;
    }
    if (std::abs((x * x + a6) * x + a7) <= residual_tol) roots.push_back(x);
  }
  return roots;
}

double bound_value(const BoundConstants& k, double rounds, double lambda) {
  const auto c = coeffs_from_constants(k);
  const double prefactor = k.smoothness / (2.0 * k.strong_convexity * rounds);
  return prefactor * rational_part(c, lambda);
}

LambdaResult optimal_lambda(const BoundConstants& k, double rounds, int guard_grid) {
  if (!(rounds > 0)) throw ArgumentError("optimal_lambda: rounds must be > 0");
  const auto c = coeffs_from_constants(k);
  const double prefactor = k.smoothness / (2.0 * k.strong_convexity * rounds);
  const auto p_of = [&](double l) { return prefactor * rational_part(c, l); };

  LambdaResult result;
  if (c.degenerate) {
    const auto [x, v] = grid_golden_min(p_of, 0.0, 100.0, std::max(guard_grid, 2));
    result.lambda_star = x;
    result.p_min = v;
    result.grid_fallback = true;
    result.interior = v < p_of(0.0);
    return result;
  }

  if (c.a3 >= c.a4 * c.a5) {
    // Stationarity cubic is nonnegative at 0 and increasing for lambda > 0:
    // no interior optimum, the boundary lambda = 0 is the minimizer.
    result.lambda_star = 0.0;
    result.p_min = p_of(0.0);
    result.interior = false;
    return result;
  }

  for (double x : cardano_real_roots(c.a6, c.a7)) result.roots.push_back(x - c.shift);
  std::sort(result.roots.begin(), result.roots.end());

  double lambda_star = 0.0;
  for (double r : result.roots) lambda_star = std::max(lambda_star, r);
  result.lambda_star = std::max(0.0, lambda_star);
  result.p_min = p_of(result.lambda_star);
  result.interior = true;

  // Guard: an independent numeric minimization must land on the same value.
  const auto [gx, gv] =
      grid_golden_min(p_of, 0.0, 10.0 * result.lambda_star + 1.0, std::max(guard_grid, 2));
  const double scale = std::max({std::abs(gv), std::abs(result.p_min), 1e-300});
  if (result.p_min > gv + 1e-6 || std::abs(result.p_min - gv) > 1e-4 * scale) {
    std::ostringstream msg;
    msg << "optimal_lambda: closed form (lambda=" << result.lambda_star
        << ", P=" << result.p_min << ") disagrees with numeric minimum (lambda=" << gx
        << ", P=" << gv << ")";
    throw NumericError(msg.str());
  }
  return result;
}

std::optional<double> convergence_bound(const BoundConstants& k, double mean_coef, double t) {
  check_constants(k);
  if (!(t >= 1.0)) throw ArgumentError("convergence_bound: t must be >= 1");
  if (2.0 * mean_coef - 1.0 <= 0.0) return std::nullopt;
  const double g2 = k.grad_bound * k.grad_bound;
  const double a = g2 * mean_coef * mean_coef * mean_coef + 3.0 * g2 * mean_coef * mean_coef +
                   2.0 * k.smoothness * k.gamma * mean_coef + noise_term(k);
  const double mu2 = k.strong_convexity * k.strong_convexity;
  return k.smoothness / (2.0 * t) * (a / (mu2 * (2.0 * mean_coef - 1.0)) + k.init_gap_sq);
}

double one_iteration_bound(const BoundConstants& k, double mean_coef, double eta,
                           double current_gap) {
  check_constants(k);
  if (!(eta >= 0.0)) throw ArgumentError("one_iteration_bound: eta must be >= 0");
  const double g2 = k.grad_bound * k.grad_bound;
  const double a = g2 * mean_coef * mean_coef * mean_coef + 3.0 * g2 * mean_coef * mean_coef +
                   2.0 * k.smoothness * k.gamma * mean_coef + noise_term(k);
  return (1.0 - k.strong_convexity * eta * mean_coef) * current_gap + eta * eta * a;
}

EstimatedConstants estimate_constants(const RunTrace& trace) {
  if (trace.max_grad_norm <= 0.0 || !(trace.min_gap <= trace.max_gap))
    throw ArgumentError("estimate_constants: trace has no gradient/gap observations");
  if (trace.client_opt_losses.empty() ||
      trace.client_opt_losses.size() != trace.weights.size())
    throw ArgumentError("estimate_constants: per-client optimum losses missing");
  if (!std::isfinite(trace.global_opt_loss))
    throw ArgumentError("estimate_constants: global optimum loss missing");
  if (!std::isfinite(trace.init_gap_sq))
    throw ArgumentError("estimate_constants: initial squared distance missing");

  EstimatedConstants out;
  BoundConstants& k = out.constants;

  k.grad_bound = trace.max_grad_norm;
  out.provenance.push_back("G: empirical (max per-sample gradient norm)");
  k.q0 = trace.min_gap;
  k.q1 = trace.max_gap;
  out.provenance.push_back("Q0/Q1: empirical (min/max observed loss gap)");

  double weighted_opt = 0.0;
  for (std::size_t i = 0; i < trace.client_opt_losses.size(); ++i)
    weighted_opt += trace.weights[i] * trace.client_opt_losses[i];
  k.gamma = std::max(0.0, trace.global_opt_loss - weighted_opt);
  out.provenance.push_back("Gamma: empirical (global vs. weighted per-client optima)");

  if (trace.analytic_smoothness) {
    k.smoothness = *trace.analytic_smoothness;
    out.provenance.push_back("L: analytic");
  } else if (std::isfinite(trace.max_feature_sq_norm)) {
    // Softmax cross-entropy Hessian is bounded by 0.5 * ||x~||^2 where x~
    // appends the bias coordinate.
    k.smoothness = 0.5 * (trace.max_feature_sq_norm + 1.0);
    out.provenance.push_back("L: empirical (softmax Hessian bound from max feature norm)");
  } else {
    throw ArgumentError("estimate_constants: smoothness unavailable (supply analytic L "
                        "or max_feature_sq_norm)");
  }

  if (trace.analytic_strong_convexity) {
    k.strong_convexity = *trace.analytic_strong_convexity;
    out.provenance.push_back("mu: analytic");
  } else {
    throw ArgumentError("estimate_constants: strong convexity cannot be inferred from a "
                        "trace; supply analytic mu");
  }

  k.init_gap_sq = trace.init_gap_sq;
  out.provenance.push_back("E||w1-w*||^2: empirical");
  k.dim = trace.param_dim;
  k.min_batch = static_cast<double>(std::max<long long>(1, trace.min_batch));
  k.sigma = trace.sigma;
  k.clip_bound = trace.clip_bound;
  return out;
}

}  // namespace fedfdp
