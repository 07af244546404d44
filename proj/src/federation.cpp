#include "fedfdp/federation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "fedfdp/accountant.hpp"
#include "fedfdp/errors.hpp"
#include "fedfdp/fairness.hpp"

namespace fedfdp {

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "fedavg") return Algorithm::kFedAvg;
  if (name == "fedfair") return Algorithm::kFedFair;
  if (name == "fedfdp") return Algorithm::kFedFdp;
  throw ConfigError("unknown algorithm: " + name);
}

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kFedAvg: return "fedavg";
    case Algorithm::kFedFair: return "fedfair";
    case Algorithm::kFedFdp: return "fedfdp";
  }
  return "?";
}

std::pair<ParamVector, double> server_aggregate(const std::vector<ParamVector>& client_params,
                                                const std::vector<double>& client_losses,
                                                const std::vector<double>& weights) {
  if (client_params.size() != weights.size() || client_losses.size() != weights.size())
    throw ArgumentError("server_aggregate: client count mismatch");
  if (client_params.empty()) throw ArgumentError("server_aggregate: no clients");
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  if (std::abs(wsum - 1.0) > 1e-9) throw ArgumentError("server_aggregate: weights do not sum to 1");

  ParamVector agg(client_params[0].size(), 0.0);
  double loss = 0.0;
  for (std::size_t c = 0; c < client_params.size(); ++c) {
    if (client_params[c].size() != agg.size())
      throw ArgumentError("server_aggregate: parameter length mismatch");
    for (std::size_t i = 0; i < agg.size(); ++i) agg[i] += weights[c] * client_params[c][i];
    loss += weights[c] * client_losses[c];
  }
  return {std::move(agg), loss};
}

namespace {

std::vector<std::span<const Example>> split_batches(std::span<const Example> shuffled,
                                                    int batch_size) {
  std::vector<std::span<const Example>> batches;
  for (std::size_t start = 0; start < shuffled.size(); start += batch_size)
    batches.push_back(shuffled.subspan(start, std::min<std::size_t>(batch_size,
                                                                    shuffled.size() - start)));
  return batches;
}

std::vector<Example> shuffled_copy(std::span<const Example> train, Rng& rng) {
  std::vector<Example> out(train.begin(), train.end());
  rng.shuffle(out);
  return out;
}

}  // namespace

FedFairOutcome local_update_fedfair(const ParamVector& w, double global_loss_prev,
                                    std::span<const Example> train, const ModelSpec& model,
                                    double eta, double lambda, int batch_size,
                                    Rng& shuffle_rng) {
  if (train.empty()) throw ArgumentError("local_update_fedfair: empty client");
  const auto shuffled = shuffled_copy(train, shuffle_rng);

  FedFairOutcome out;
  out.params = w;
  out.min_gap = std::numeric_limits<double>::infinity();
  out.max_gap = -std::numeric_limits<double>::infinity();
  double lr_factor_sum = 0.0;
  std::size_t n_batches = 0;

  for (const auto batch : split_batches(shuffled, batch_size)) {
    const double gap = loss_gap(batch_mean_loss(out.params, model, batch), global_loss_prev);
    const double lr = dynamic_lr(eta, lambda, gap);
    const auto grad = batch_mean_grad(out.params, model, batch);
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      out.params[i] -= lr * grad[i];
      norm_sq += grad[i] * grad[i];
    }
    out.min_gap = std::min(out.min_gap, gap);
    out.max_gap = std::max(out.max_gap, gap);
    out.max_batch_grad_norm = std::max(out.max_batch_grad_norm, std::sqrt(norm_sq));
    lr_factor_sum += 1.0 + lambda * gap;
    ++n_batches;
  }
  out.local_loss = batch_mean_loss(out.params, model, train);
  out.mean_lr_factor = lr_factor_sum / static_cast<double>(n_batches);
  return out;
}

FedFairOutcome local_update_fedavg(const ParamVector& w, std::span<const Example> train,
                                   const ModelSpec& model, double eta, int batch_size,
                                   Rng& shuffle_rng) {
  if (train.empty()) throw ArgumentError("local_update_fedavg: empty client");
  const auto shuffled = shuffled_copy(train, shuffle_rng);

  FedFairOutcome out;
  out.params = w;
  for (const auto batch : split_batches(shuffled, batch_size)) {
    const auto grad = batch_mean_grad(out.params, model, batch);
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      out.params[i] -= eta * grad[i];
      norm_sq += grad[i] * grad[i];
    }
    out.max_batch_grad_norm = std::max(out.max_batch_grad_norm, std::sqrt(norm_sq));
  }
  out.local_loss = batch_mean_loss(out.params, model, train);
  out.min_gap = out.max_gap = 0.0;
  return out;
}

FedFdpOutcome local_update_fedfdp(const ParamVector& w, double global_loss_prev,
                                  std::span<const Example> train, const ModelSpec& model,
                                  const HyperParams& hp, double eta,
                                  const FedFdpClientState& state, std::uint64_t master_seed,
                                  long long round, bool allow_negative_coef) {
  if (train.empty()) throw ArgumentError("local_update_fedfdp: empty client");
  const auto client_id = static_cast<std::uint64_t>(state.clip.client_id);
  const auto r = static_cast<std::uint64_t>(round);

  // Poisson sampling: each example joins the batch independently with
  // probability q, the scheme the accountant's guarantees are stated for.
  Rng batch_rng = substream(master_seed, client_id, r, StreamPurpose::kBatchSample);
  std::vector<Example> batch;
  for (const auto& ex : train)
    if (batch_rng.next_double() < hp.sample_ratio) batch.push_back(ex);

  FedFdpOutcome out;
  if (batch.empty()) {
    // Nothing sampled this round: no update, and the previously released
    // loss is re-emitted (post-processing, no fresh data touched).
    out.params = w;
    out.noised_loss = state.last_noised_loss;
    out.next_state = state;
    out.next_state.last_noised_loss = out.noised_loss;
    out.skipped = true;
    return out;
  }

  // This round's loss clip bound: privatized mean of the previous round's
  // batch losses. Round 0 has no predecessor and uses the configured seed.
  double bound = state.clip.bound;
  if (!state.prev_losses.empty()) {
    Rng bound_rng = substream(master_seed, client_id, r, StreamPurpose::kBoundNoise);
    bound = adaptive_loss_bound(state.clip, state.prev_losses, hp.sigma_l, bound_rng);
  }

  const DpNoiseSpec noise{hp.sigma, hp.sigma_l, hp.clip_bound, hp.loss_clip_init};
  Rng grad_rng = substream(master_seed, client_id, r, StreamPurpose::kGradNoise);
  out.params = fair_dpsgd_step(w, model, batch, hp.lambda, global_loss_prev, noise, eta,
                               grad_rng, &out.step, allow_negative_coef);

  std::vector<double> losses(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j)
    losses[j] = per_sample_loss(out.params, model, batch[j]);

  Rng loss_rng = substream(master_seed, client_id, r, StreamPurpose::kLossNoise);
  out.noised_loss = noised_loss_mean(losses, bound, hp.sigma_l, loss_rng);

  out.next_state.clip = {state.clip.client_id, bound};
  out.next_state.prev_losses = std::move(losses);
  out.next_state.last_noised_loss = out.noised_loss;
  out.batch_size = static_cast<long long>(batch.size());
  return out;
}

namespace {

struct ClientShards {
  std::vector<Example> train;
  std::vector<Example> eval;
};

ClientShards split_holdout(const ClientDataset& client, double eval_fraction,
                           std::uint64_t master_seed) {
  const std::size_t n = client.examples.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = substream(master_seed, static_cast<std::uint64_t>(client.client_id), 0,
                      StreamPurpose::kHoldout);
  rng.shuffle(order);

  const std::size_t eval_count =
      n >= 5 ? static_cast<std::size_t>(eval_fraction * static_cast<double>(n)) : 0;
  ClientShards shards;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = (i < eval_count) ? shards.eval : shards.train;
    dst.push_back(client.examples[order[i]]);
  }
  return shards;
}

double eval_accuracy(const ParamVector& w, const ModelSpec& model,
                     std::span<const Example> shard) {
  if (model.kind == ModelKind::kSquaredDistance)
    return std::numeric_limits<double>::quiet_NaN();
  std::size_t hits = 0;
  for (const auto& ex : shard) {
    const auto probs = predict(w, model, ex);
    const auto best = std::max_element(probs.begin(), probs.end());
    if (static_cast<int>(best - probs.begin()) == ex.label) ++hits;
  }
  return shard.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(shard.size());
}

// Run `fn(client_index)` for all clients across a small thread pool. Outputs
// are written to disjoint slots, so scheduling cannot change results.
template <typename Fn>
void parallel_for_clients(std::size_t n_clients, int workers, Fn&& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_threads =
      std::min<std::size_t>(n_clients, workers > 0 ? static_cast<unsigned>(workers) : hw);
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < n_clients; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n_clients; i += n_threads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const std::size_t n_clients = config.clients.size();
  if (n_clients == 0) throw ArgumentError("run_experiment: no clients");
  const bool dp = config.algorithm == Algorithm::kFedFdp;

  // Resolve the round count. Budget-first mode inverts the accountant.
  long long rounds = 0;
  const long long extra = config.charge_initial_loss_release ? 1 : 0;
  if (config.hyper.rounds && config.hyper.eps_budget)
    throw ArgumentError("run_experiment: set exactly one of rounds / eps_budget");
  if (config.hyper.rounds) {
    rounds = *config.hyper.rounds;
  } else if (config.hyper.eps_budget) {
    if (!dp) throw ArgumentError("run_experiment: eps_budget requires fedfdp");
    const auto mr = max_rounds(*config.hyper.eps_budget, config.hyper.delta,
                               config.hyper.sample_ratio, config.hyper.sigma,
                               config.hyper.sigma_l, extra);
    if (!mr.feasible)
      throw InfeasibleBudget("epsilon budget " + std::to_string(*config.hyper.eps_budget) +
                             " is below the accountant floor " +
                             std::to_string(mr.epsilon_at_rounds));
    rounds = mr.rounds;
  } else {
    throw ArgumentError("run_experiment: set one of rounds / eps_budget");
  }

  // Holdout split and exact count-ratio weights over the training shards.
  std::vector<ClientShards> shards(n_clients);
  std::size_t total_train = 0;
  for (std::size_t c = 0; c < n_clients; ++c) {
    shards[c] = split_holdout(config.clients[c], config.eval_fraction, config.seed);
    if (shards[c].train.empty()) throw ArgumentError("run_experiment: client train shard empty");
    total_train += shards[c].train.size();
  }
  std::vector<double> weights(n_clients);
  for (std::size_t c = 0; c < n_clients; ++c)
    weights[c] =
        static_cast<double>(shards[c].train.size()) / static_cast<double>(total_train);

  Rng init_rng = substream(config.seed, 0, 0, StreamPurpose::kParamInit);
  ParamVector global = init_params(config.model, init_rng);

  ExperimentResult result;
  result.trace.param_dim = config.model.param_count();
  result.trace.sigma = config.hyper.sigma;
  result.trace.clip_bound = config.hyper.clip_bound;
  result.trace.weights = weights;

  // Initial broadcast loss. FedFDP privatizes the evaluation with the loss
  // mechanism at the seed bound; FedFair aggregates exact losses.
  std::vector<FedFdpClientState> states(n_clients);
  double broadcast_loss = 0.0;
  if (dp) {
    std::vector<double> initial(n_clients, 0.0);
    parallel_for_clients(n_clients, config.workers, [&](std::size_t c) {
      states[c].clip = {static_cast<int>(c), config.hyper.loss_clip_init};
      Rng batch_rng = substream(config.seed, c, 0, StreamPurpose::kBatchSample);
      std::vector<double> losses;
      for (const auto& ex : shards[c].train)
        if (batch_rng.next_double() < config.hyper.sample_ratio)
          losses.push_back(per_sample_loss(global, config.model, ex));
      if (!losses.empty()) {
        Rng noise_rng = substream(config.seed, c, 0, StreamPurpose::kInitialLoss);
        initial[c] = noised_loss_mean(losses, config.hyper.loss_clip_init,
                                      config.hyper.sigma_l, noise_rng);
      }
      states[c].last_noised_loss = initial[c];
    });
    for (std::size_t c = 0; c < n_clients; ++c) broadcast_loss += weights[c] * initial[c];
  } else if (config.algorithm == Algorithm::kFedFair) {
    for (std::size_t c = 0; c < n_clients; ++c)
      broadcast_loss += weights[c] * batch_mean_loss(global, config.model, shards[c].train);
  }
  result.initial_global_loss = broadcast_loss;

  std::vector<ParamVector> client_params(n_clients);
  std::vector<double> client_losses(n_clients);
  std::vector<FedFdpOutcome> dp_outcomes(n_clients);
  std::vector<FedFairOutcome> fair_outcomes(n_clients);

  for (long long t = 1; t <= rounds; ++t) {
    const double eta = config.schedule.inverse_t
                           ? config.schedule.beta / static_cast<double>(t)
                           : config.hyper.eta;

    parallel_for_clients(n_clients, config.workers, [&](std::size_t c) {
      switch (config.algorithm) {
        case Algorithm::kFedAvg: {
          Rng shuffle_rng = substream(config.seed, c, static_cast<std::uint64_t>(t),
                                      StreamPurpose::kShuffle);
          fair_outcomes[c] = local_update_fedavg(global, shards[c].train, config.model, eta,
                                                 config.batch_size, shuffle_rng);
          break;
        }
        case Algorithm::kFedFair: {
          Rng shuffle_rng = substream(config.seed, c, static_cast<std::uint64_t>(t),
                                      StreamPurpose::kShuffle);
          fair_outcomes[c] =
              local_update_fedfair(global, broadcast_loss, shards[c].train, config.model, eta,
                                   config.hyper.lambda, config.batch_size, shuffle_rng);
          break;
        }
        case Algorithm::kFedFdp: {
          dp_outcomes[c] = local_update_fedfdp(global, broadcast_loss, shards[c].train,
                                               config.model, config.hyper, eta, states[c],
                                               config.seed, t, config.allow_negative_coef);
          break;
        }
      }
    });

    RoundMetrics metrics;
    metrics.round = static_cast<int>(t);
    metrics.batch_sizes.resize(n_clients);
    double coef_sum = 0.0;
    double coef_weight = 0.0;
    for (std::size_t c = 0; c < n_clients; ++c) {
      if (dp) {
        const auto& o = dp_outcomes[c];
        client_params[c] = o.params;
        client_losses[c] = o.noised_loss;
        states[c] = o.next_state;
        metrics.batch_sizes[c] = o.batch_size;
        if (!o.skipped) {
          result.trace.max_grad_norm =
              std::max(result.trace.max_grad_norm, o.step.max_grad_norm);
          result.trace.min_gap = std::min(result.trace.min_gap, o.step.min_gap);
          result.trace.max_gap = std::max(result.trace.max_gap, o.step.max_gap);
          result.trace.min_batch = std::min(result.trace.min_batch, o.batch_size);
          coef_sum += weights[c] * o.step.mean_coefficient;
          coef_weight += weights[c];
        }
      } else {
        const auto& o = fair_outcomes[c];
        client_params[c] = o.params;
        client_losses[c] = o.local_loss;
        metrics.batch_sizes[c] = static_cast<long long>(shards[c].train.size());
        result.trace.max_grad_norm =
            std::max(result.trace.max_grad_norm, o.max_batch_grad_norm);
        if (config.algorithm == Algorithm::kFedFair) {
          result.trace.min_gap = std::min(result.trace.min_gap, o.min_gap);
          result.trace.max_gap = std::max(result.trace.max_gap, o.max_gap);
        }
        result.trace.min_batch =
            std::min<long long>(result.trace.min_batch,
                                std::min<long long>(config.batch_size,
                                                    shards[c].train.size()));
        coef_sum += weights[c] * o.mean_lr_factor;
        coef_weight += weights[c];
      }
    }
    if (coef_weight > 0.0) {
      const double round_coef = coef_sum / coef_weight;
      // Running average of the per-round mean clipping coefficient.
      result.trace.mean_clip_coef =
          (result.trace.mean_clip_coef * static_cast<double>(t - 1) + round_coef) /
          static_cast<double>(t);
    }

    auto [agg, agg_loss] = server_aggregate(client_params, client_losses, weights);
    global = std::move(agg);
    broadcast_loss = agg_loss;

    // Evaluation metrics use exact losses, never the privatized ones.
    LossReport train_report{std::vector<double>(n_clients), weights};
    LossReport eval_report{std::vector<double>(n_clients), weights};
    metrics.client_eval_loss.resize(n_clients);
    metrics.client_eval_acc.resize(n_clients);
    parallel_for_clients(n_clients, config.workers, [&](std::size_t c) {
      train_report.losses[c] = batch_mean_loss(global, config.model, shards[c].train);
      const auto& eval_shard = shards[c].eval.empty() ? shards[c].train : shards[c].eval;
      eval_report.losses[c] = batch_mean_loss(global, config.model, eval_shard);
      metrics.client_eval_acc[c] = eval_accuracy(global, config.model, eval_shard);
    });
    metrics.client_eval_loss = eval_report.losses;
    metrics.global_train_loss = global_loss(train_report);
    metrics.psi_train = psi(train_report);
    metrics.psi_eval = psi(eval_report);
    metrics.eps_spent =
        dp ? total_privacy_loss(config.hyper.sample_ratio, config.hyper.sigma,
                                config.hyper.sigma_l, t, config.hyper.delta, extra)
                 .epsilon
           : 0.0;
    result.rounds.push_back(std::move(metrics));
  }

  result.final_params = std::move(global);
  result.rounds_run = rounds;
  return result;
}

double fit_local_optimum(const ClientDataset& client, const ModelSpec& model, double eta,
                         int batch_size, int epochs, std::uint64_t seed) {
  Rng init_rng = substream(seed, static_cast<std::uint64_t>(client.client_id), 0,
                           StreamPurpose::kParamInit);
  ParamVector w = init_params(model, init_rng);
  for (int e = 0; e < epochs; ++e) {
    Rng shuffle_rng = substream(seed, static_cast<std::uint64_t>(client.client_id),
                                static_cast<std::uint64_t>(e + 1), StreamPurpose::kShuffle);
    w = local_update_fedavg(w, client.examples, model, eta, batch_size, shuffle_rng).params;
  }
  return batch_mean_loss(w, model, client.examples);
}

}  // namespace fedfdp
