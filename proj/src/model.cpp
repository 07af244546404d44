#include "fedfdp/model.hpp"

#include <algorithm>
#include <cmath>

#include "fedfdp/errors.hpp"

namespace fedfdp {

int ModelSpec::param_count() const {
  switch (kind) {
    case ModelKind::kMultinomialLogistic:
      return classes * input_dim + classes;
    case ModelKind::kMlp1Hidden:
      return hidden * input_dim + hidden + classes * hidden + classes;
    case ModelKind::kSquaredDistance:
      return input_dim;
  }
  throw ConfigError("unknown model kind");
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "multinomial-logistic") return ModelKind::kMultinomialLogistic;
  if (name == "mlp-1-hidden") return ModelKind::kMlp1Hidden;
  if (name == "sq-dist") return ModelKind::kSquaredDistance;
  throw ConfigError("unknown model kind: " + name);
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kMultinomialLogistic: return "multinomial-logistic";
    case ModelKind::kMlp1Hidden: return "mlp-1-hidden";
    case ModelKind::kSquaredDistance: return "sq-dist";
  }
  return "?";
}

namespace {

void check_dims(const ParamVector& params, const ModelSpec& spec, const Example& x) {
  if (static_cast<int>(params.size()) != spec.param_count())
    throw ConfigError("parameter vector length " + std::to_string(params.size()) +
                      " does not match model (" + std::to_string(spec.param_count()) + ")");
  if (static_cast<int>(x.features.size()) != spec.input_dim)
    throw ConfigError("feature length " + std::to_string(x.features.size()) +
                      " does not match model input_dim " + std::to_string(spec.input_dim));
}

// In-place softmax with the usual max-shift for stability.
void softmax(std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (auto& v : logits) {
    v = std::exp(v - m);
    sum += v;
  }
  for (auto& v : logits) v /= sum;
}

std::vector<double> logistic_logits(const ParamVector& params, const ModelSpec& spec,
                                    const Example& x) {
  const int K = spec.classes, D = spec.input_dim;
  std::vector<double> logits(K);
  for (int k = 0; k < K; ++k) {
    double z = params[K * D + k];  // bias
    const double* row = params.data() + k * D;
    for (int j = 0; j < D; ++j) z += row[j] * x.features[j];
    logits[k] = z;
  }
  return logits;
}

struct MlpForward {
  std::vector<double> hidden_act;  // tanh(W1 x + b1)
  std::vector<double> probs;       // softmax(W2 h + b2)
};

MlpForward mlp_forward(const ParamVector& params, const ModelSpec& spec, const Example& x) {
  const int D = spec.input_dim, H = spec.hidden, K = spec.classes;
  const double* w1 = params.data();
  const double* b1 = w1 + H * D;
  const double* w2 = b1 + H;
  const double* b2 = w2 + K * H;

  MlpForward f;
  f.hidden_act.resize(H);
  for (int h = 0; h < H; ++h) {
    double z = b1[h];
    const double* row = w1 + h * D;
    for (int j = 0; j < D; ++j) z += row[j] * x.features[j];
    f.hidden_act[h] = std::tanh(z);
  }
  f.probs.resize(K);
  for (int k = 0; k < K; ++k) {
    double z = b2[k];
    const double* row = w2 + k * H;
    for (int h = 0; h < H; ++h) z += row[h] * f.hidden_act[h];
    f.probs[k] = z;
  }
  softmax(f.probs);
  return f;
}

}  // namespace

std::vector<double> predict(const ParamVector& params, const ModelSpec& spec, const Example& x) {
  check_dims(params, spec, x);
  switch (spec.kind) {
    case ModelKind::kMultinomialLogistic: {
      auto logits = logistic_logits(params, spec, x);
      softmax(logits);
      return logits;
    }
    case ModelKind::kMlp1Hidden:
      return mlp_forward(params, spec, x).probs;
    case ModelKind::kSquaredDistance:
      throw ConfigError("predict is undefined for the sq-dist model");
  }
  throw ConfigError("unknown model kind");
}

double per_sample_loss(const ParamVector& params, const ModelSpec& spec, const Example& x) {
  if (spec.kind == ModelKind::kSquaredDistance) {
    check_dims(params, spec, x);
    double s = 0.0;
    for (int j = 0; j < spec.input_dim; ++j) {
      const double diff = params[j] - x.features[j];
      s += diff * diff;
    }
    return 0.5 * s;
  }
  if (x.label < 0 || x.label >= spec.classes)
    throw ConfigError("label " + std::to_string(x.label) + " out of range");
  const auto probs = predict(params, spec, x);
  return -std::log(std::max(probs[x.label], kProbClamp));
}

ParamVector per_sample_grad(const ParamVector& params, const ModelSpec& spec, const Example& x) {
  check_dims(params, spec, x);
  ParamVector grad(params.size(), 0.0);
  switch (spec.kind) {
    case ModelKind::kSquaredDistance: {
      for (int j = 0; j < spec.input_dim; ++j) grad[j] = params[j] - x.features[j];
      return grad;
    }
    case ModelKind::kMultinomialLogistic: {
      const int K = spec.classes, D = spec.input_dim;
      auto probs = logistic_logits(params, spec, x);
      softmax(probs);
      for (int k = 0; k < K; ++k) {
        const double err = probs[k] - (k == x.label ? 1.0 : 0.0);
        double* row = grad.data() + k * D;
        for (int j = 0; j < D; ++j) row[j] = err * x.features[j];
        grad[K * D + k] = err;
      }
      return grad;
    }
    case ModelKind::kMlp1Hidden: {
      const int D = spec.input_dim, H = spec.hidden, K = spec.classes;
      const double* w2 = params.data() + H * D + H;
      const auto f = mlp_forward(params, spec, x);

      double* g_w1 = grad.data();
      double* g_b1 = g_w1 + H * D;
      double* g_w2 = g_b1 + H;
      double* g_b2 = g_w2 + K * H;

      std::vector<double> dlogits(K);
      for (int k = 0; k < K; ++k) dlogits[k] = f.probs[k] - (k == x.label ? 1.0 : 0.0);

      for (int k = 0; k < K; ++k) {
        double* row = g_w2 + k * H;
        for (int h = 0; h < H; ++h) row[h] = dlogits[k] * f.hidden_act[h];
        g_b2[k] = dlogits[k];
      }
      for (int h = 0; h < H; ++h) {
        double dh = 0.0;
        for (int k = 0; k < K; ++k) dh += w2[k * H + h] * dlogits[k];
        const double dpre = dh * (1.0 - f.hidden_act[h] * f.hidden_act[h]);
        double* row = g_w1 + h * D;
        for (int j = 0; j < D; ++j) row[j] = dpre * x.features[j];
        g_b1[h] = dpre;
      }
      return grad;
    }
  }
  throw ConfigError("unknown model kind");
}

double batch_mean_loss(const ParamVector& params, const ModelSpec& spec,
                       std::span<const Example> batch) {
  if (batch.empty()) throw ArgumentError("batch_mean_loss: empty batch");
  double sum = 0.0;
  for (const auto& x : batch) sum += per_sample_loss(params, spec, x);
  return sum / static_cast<double>(batch.size());
}

ParamVector batch_mean_grad(const ParamVector& params, const ModelSpec& spec,
                            std::span<const Example> batch) {
  if (batch.empty()) throw ArgumentError("batch_mean_grad: empty batch");
  ParamVector acc(params.size(), 0.0);
  for (const auto& x : batch) {
    const auto g = per_sample_grad(params, spec, x);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& v : acc) v *= inv;
  return acc;
}

ParamVector init_params(const ModelSpec& spec, Rng& rng) {
  ParamVector params(spec.param_count(), 0.0);
  if (spec.kind == ModelKind::kMlp1Hidden) {
    for (auto& v : params) v = 0.1 * rng.next_gaussian();
  }
  return params;
}

}  // namespace fedfdp
