#ifndef FEDFDP_FEDERATION_HPP
#define FEDFDP_FEDERATION_HPP

#include <optional>
#include <span>
#include <vector>

#include "fedfdp/data.hpp"
#include "fedfdp/lambda_solver.hpp"
#include "fedfdp/model.hpp"
#include "fedfdp/privacy_mech.hpp"

namespace fedfdp {

enum class Algorithm { kFedAvg, kFedFair, kFedFdp };

Algorithm algorithm_from_string(const std::string& name);
std::string to_string(Algorithm algorithm);

// Learning-rate schedule. Inverse-t uses eta_t = beta / t with 1-based
// rounds, the schedule under which the convergence bound is derived.
struct ScheduleSpec {
  bool inverse_t = false;
  double beta = 0.0;
};

struct HyperParams {
  double eta = 0.1;
  double lambda = 0.0;
  double sample_ratio = 0.05;   // q, per-example Poisson inclusion probability
  double clip_bound = 0.1;      // C
  double sigma = 0.0;
  double loss_clip_init = 2.5;  // C_l seed value for the adaptive bound
  double sigma_l = 0.0;
  std::optional<long long> rounds;      // T
  std::optional<double> eps_budget;     // alternative to T
  double delta = 1e-5;
};

struct RoundMetrics {
  int round = 0;  // 1-based
  double global_train_loss = 0.0;
  double eps_spent = 0.0;
  double psi_train = 0.0;
  double psi_eval = 0.0;
  std::vector<double> client_eval_loss;
  std::vector<double> client_eval_acc;
  std::vector<long long> batch_sizes;  // realized per-client batch sizes
};

// Weighted aggregation of client models and losses, accumulated in ascending
// client order so the result does not depend on execution order.
std::pair<ParamVector, double> server_aggregate(const std::vector<ParamVector>& client_params,
                                                const std::vector<double>& client_losses,
                                                const std::vector<double>& weights);

struct FedFairOutcome {
  ParamVector params;
  double local_loss = 0.0;  // exact loss over the full local set, post-update
  double min_gap = 0.0;
  double max_gap = 0.0;
  double max_batch_grad_norm = 0.0;
  double mean_lr_factor = 1.0;  // batch-mean of (1 + lambda * gap)
};

// One FedFair local pass: shuffled fixed-size batches, each stepped with the
// dynamic learning rate eta * (1 + lambda * (batch loss - broadcast loss)).
FedFairOutcome local_update_fedfair(const ParamVector& w, double global_loss_prev,
                                    std::span<const Example> train, const ModelSpec& model,
                                    double eta, double lambda, int batch_size,
                                    Rng& shuffle_rng);

// Plain minibatch SGD over the same batch split (the lambda = 0 baseline).
FedFairOutcome local_update_fedavg(const ParamVector& w, std::span<const Example> train,
                                   const ModelSpec& model, double eta, int batch_size,
                                   Rng& shuffle_rng);

// Everything a FedFDP client carries between rounds.
struct FedFdpClientState {
  LossClipState clip;                // bound of the previous round
  std::vector<double> prev_losses;   // previous round's raw batch losses
  double last_noised_loss = 0.0;     // re-emitted when a sampled batch is empty
};

struct FedFdpOutcome {
  ParamVector params;
  double noised_loss = 0.0;
  FedFdpClientState next_state;
  long long batch_size = 0;
  bool skipped = false;  // empty Poisson batch: no update, previous loss re-emitted
  StepTrace step;
};

FedFdpOutcome local_update_fedfdp(const ParamVector& w, double global_loss_prev,
                                  std::span<const Example> train, const ModelSpec& model,
                                  const HyperParams& hp, double eta,
                                  const FedFdpClientState& state, std::uint64_t master_seed,
                                  long long round, bool allow_negative_coef = false);

struct ExperimentConfig {
  std::vector<ClientDataset> clients;
  ModelSpec model;
  Algorithm algorithm = Algorithm::kFedAvg;
  HyperParams hyper;
  ScheduleSpec schedule;
  int batch_size = 32;          // FedFair/FedAvg batching
  double eval_fraction = 0.2;   // per-client holdout for evaluation metrics
  std::uint64_t seed = 0;
  int workers = 0;              // 0 = hardware concurrency
  bool allow_negative_coef = false;
  // Charge the initial privatized loss evaluation as one extra loss-channel
  // release in the epsilon ledger.
  bool charge_initial_loss_release = true;
};

struct ExperimentResult {
  std::vector<RoundMetrics> rounds;
  ParamVector final_params;
  RunTrace trace;
  long long rounds_run = 0;
  double initial_global_loss = 0.0;
};

// The full server loop: broadcast, parallel local updates, fixed-order
// aggregation, metric collection. Throws InfeasibleBudget when an epsilon
// budget cannot cover the initial release.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Long plain-SGD fit of one shard; returns the final full-set loss. Used to
// estimate per-client optima for the heterogeneity constant.
double fit_local_optimum(const ClientDataset& client, const ModelSpec& model, double eta,
                         int batch_size, int epochs, std::uint64_t seed);

}  // namespace fedfdp

#endif  // FEDFDP_FEDERATION_HPP
