#ifndef FEDFDP_MODEL_HPP
#define FEDFDP_MODEL_HPP

#include <span>
#include <string>
#include <vector>

#include "fedfdp/rng.hpp"

namespace fedfdp {

// Flat model parameter vector. Layout per model kind is documented below;
// its length is fixed for the lifetime of a run.
using ParamVector = std::vector<double>;

struct Example {
  std::vector<double> features;  // normalized to [0, 1] per feature
  int label = 0;                 // class index in [0, K)
};

enum class ModelKind {
  kMultinomialLogistic,  // softmax regression; params = W (K x D, row-major), then b (K)
  kMlp1Hidden,           // tanh MLP; params = W1 (H x D), b1 (H), W2 (K x H), b2 (K)
  kSquaredDistance,      // loss(w, x) = 0.5 * ||w - x||^2; params = point of dim D
};

struct ModelSpec {
  ModelKind kind = ModelKind::kMultinomialLogistic;
  int input_dim = 0;
  int classes = 0;
  int hidden = 0;  // kMlp1Hidden only

  int param_count() const;
};

ModelKind model_kind_from_string(const std::string& name);
std::string to_string(ModelKind kind);

// Class-probability vector (softmax output). Entries are nonnegative and sum
// to 1. Undefined for kSquaredDistance, which has no classification head.
std::vector<double> predict(const ParamVector& params, const ModelSpec& spec, const Example& x);

// Cross-entropy -log p[label], with p clamped below at 1e-12 so the loss is
// finite and bounded by -ln(1e-12).
double per_sample_loss(const ParamVector& params, const ModelSpec& spec, const Example& x);

// Analytic gradient of per_sample_loss with respect to params.
ParamVector per_sample_grad(const ParamVector& params, const ModelSpec& spec, const Example& x);

double batch_mean_loss(const ParamVector& params, const ModelSpec& spec,
                       std::span<const Example> batch);

// Gradient of batch_mean_loss (single accumulation pass).
ParamVector batch_mean_grad(const ParamVector& params, const ModelSpec& spec,
                            std::span<const Example> batch);

// Deterministic initial parameters. Zeros except for the MLP, whose hidden
// layer needs symmetry breaking (small Gaussian entries from `rng`).
ParamVector init_params(const ModelSpec& spec, Rng& rng);

constexpr double kProbClamp = 1e-12;

}  // namespace fedfdp

#endif  // FEDFDP_MODEL_HPP
