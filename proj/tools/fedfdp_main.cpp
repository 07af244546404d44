#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedfdp/accountant.hpp"
#include "fedfdp/data.hpp"
#include "fedfdp/errors.hpp"
#include "fedfdp/federation.hpp"
#include "fedfdp/lambda_solver.hpp"
#include "fedfdp/run_config.hpp"

namespace {

using nlohmann::json;

constexpr int kExitSchema = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitPartitionIo = 4;

int cmd_run(const std::string& config_path, bool print_config, std::optional<int> workers) {
  fedfdp::RunConfig cfg = fedfdp::load_run_config(config_path);
  if (const char* env_seed = std::getenv("FEDFDP_SEED"))
    cfg.seed = std::strtoull(env_seed, nullptr, 10);
  if (workers) cfg.workers = *workers;
  if (print_config) {
    std::cout << fedfdp::to_json(cfg).dump(2) << "\n";
    return 0;
  }

  auto exp = fedfdp::materialize(cfg);
  const auto result = fedfdp::run_experiment(exp);
  if (cfg.hyper.eps_budget)
    std::cerr << "derived T=" << result.rounds_run << " from eps_budget="
              << *cfg.hyper.eps_budget << "\n";

  if (!cfg.out_csv.empty()) fedfdp::write_metrics_csv(cfg.out_csv, result.rounds);
  if (!cfg.out_jsonl.empty()) fedfdp::write_metrics_jsonl(cfg.out_jsonl, result.rounds);

  json summary{{"rounds", result.rounds_run}};
  if (!result.rounds.empty()) {
    const auto& last = result.rounds.back();
    const double acc_mean =
        std::accumulate(last.client_eval_acc.begin(), last.client_eval_acc.end(), 0.0) /
        static_cast<double>(last.client_eval_acc.size());
    summary["final_acc_mean"] = acc_mean;
    summary["psi_train"] = last.psi_train;
    summary["psi_eval"] = last.psi_eval;
    summary["eps"] = last.eps_spent;
    summary["global_train_loss"] = last.global_train_loss;
  } else {
    summary["eps"] = exp.algorithm == fedfdp::Algorithm::kFedFdp
                         ? fedfdp::total_privacy_loss(exp.hyper.sample_ratio, exp.hyper.sigma,
                                                      exp.hyper.sigma_l, 0, exp.hyper.delta,
                                                      exp.charge_initial_loss_release ? 1 : 0)
                               .epsilon
                         : 0.0;
  }
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_accountant_eps(double q, double sigma, std::optional<double> sigma_l, long long T,
                       double delta, long long extra) {
  const auto r = fedfdp::total_privacy_loss(q, sigma, sigma_l, T, delta, extra);
  std::cout << json{{"epsilon", r.epsilon}, {"best_alpha", r.best_alpha}}.dump() << "\n";
  return 0;
}

int cmd_accountant_max_rounds(double eps, double delta, double q, double sigma,
                              std::optional<double> sigma_l, long long extra) {
  const auto r = fedfdp::max_rounds(eps, delta, q, sigma, sigma_l, extra);
  if (!r.feasible) {
    std::cout << json{{"error", "infeasible"}, {"floor", r.epsilon_at_rounds}}.dump() << "\n";
    return kExitInfeasible;
  }
  std::cout << json{{"T", r.rounds}, {"epsilon_at_T", r.epsilon_at_rounds}}.dump() << "\n";
  return 0;
}

int cmd_lambda_opt(const std::string& constants_path, double rounds) {
  std::ifstream in(constants_path);
  if (!in) throw fedfdp::ConfigError("cannot open constants file " + constants_path);
  json root;
  in >> root;

  fedfdp::BoundConstants k;
  k.grad_bound = root.at("G").get<double>();
  k.smoothness = root.at("L").get<double>();
  k.strong_convexity = root.at("mu").get<double>();
  k.gamma = root.at("Gamma").get<double>();
  k.init_gap_sq = root.at("w_dist").get<double>();
  k.q0 = root.at("Q0").get<double>();
  k.q1 = root.at("Q1").get<double>();
  k.dim = root.at("d").get<int>();
  k.min_batch = root.at("B_hat").get<double>();
  k.sigma = root.at("sigma").get<double>();
  k.clip_bound = root.at("C").get<double>();
  if (root.contains("T")) rounds = root.at("T").get<double>();

  const auto result = fedfdp::optimal_lambda(k, rounds);
  json flags = json::array();
  if (result.grid_fallback) flags.push_back("grid-fallback");
  if (!result.interior) flags.push_back("no-interior-optimum");
  std::cout << json{{"lambda_star", result.lambda_star},
                    {"P_min", result.p_min},
                    {"roots", result.roots},
                    {"flags", flags}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_partition(const std::string& kind, const std::string& images,
                  const std::string& labels_path, int pool_size, int dim, int classes, int n,
                  double beta, std::uint64_t seed, const std::string& out_path) {
  std::vector<int> labels;
  if (kind == "synthetic") {
    const auto pool = fedfdp::synthetic_pool(pool_size, dim, classes, seed);
    labels.reserve(pool.size());
    for (const auto& ex : pool) labels.push_back(ex.label);
  } else if (kind == "mnist" || kind == "fashion-idx") {
    const auto pool = fedfdp::load_idx(images, labels_path);
    labels.reserve(pool.size());
    for (const auto& ex : pool) labels.push_back(ex.label);
  } else {
    throw fedfdp::ConfigError("partition: unknown dataset kind " + kind);
  }

  const auto parts = fedfdp::dirichlet_partition(labels, {n, beta, seed});
  const int num_classes = 1 + *std::max_element(labels.begin(), labels.end());

  json clients = json::array();
  json histograms = json::array();
  for (const auto& part : parts) {
    clients.push_back(part);
    std::vector<long long> hist(num_classes, 0);
    for (auto idx : part) hist[labels[idx]]++;
    histograms.push_back(hist);
  }

  std::ofstream out(out_path);
  if (!out) {
    std::cerr << "cannot open output file " << out_path << "\n";
    return kExitPartitionIo;
  }
  out << json{{"n_clients", n}, {"n_classes", num_classes}, {"clients", clients},
              {"histograms", histograms}}
             .dump();
  if (!out) {
    std::cerr << "write failed for " << out_path << "\n";
    return kExitPartitionIo;
  }

  std::cout << "client";
  for (int k = 0; k < num_classes; ++k) std::cout << "\tc" << k;
  std::cout << "\ttotal\n";
  for (std::size_t c = 0; c < parts.size(); ++c) {
    std::cout << c;
    long long total = 0;
    for (int k = 0; k < num_classes; ++k) {
      const auto& hist = histograms[c];
      std::cout << '\t' << hist[k].get<long long>();
      total += hist[k].get<long long>();
    }
    std::cout << '\t' << total << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FedFDP: fairness-aware federated learning with differential privacy"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run a federated training experiment from a config");
  std::string config_path;
  bool print_config = false;
  int workers_flag = -1;
  run->add_option("--config", config_path, "Path to the run config (JSON)")->required();
  run->add_flag("--print-config", print_config, "Echo the parsed config and exit");
  run->add_option("--workers", workers_flag, "Parallel client workers (default: cores)");

  // accountant
  auto* acct = app.add_subcommand("accountant", "Privacy accounting queries");
  acct->require_subcommand(1);
  double q = 0.05, sigma = 2.0, delta = 1e-5, sigma_l_val = 0.0;
  long long T = 0, extra = 0;
  bool has_sigma_l_eps = false, has_sigma_l_mr = false;

  auto* acct_eps = acct->add_subcommand("eps", "Epsilon after T rounds");
  acct_eps->add_option("--q", q, "Sampling ratio")->required();
  acct_eps->add_option("--sigma", sigma, "Gradient noise multiplier")->required();
  auto* sl1 = acct_eps->add_option("--sigma-l", sigma_l_val, "Loss noise multiplier");
  acct_eps->add_option("--T", T, "Rounds")->required();
  acct_eps->add_option("--delta", delta, "Target delta")->required();
  acct_eps->add_option("--extra-loss-releases", extra, "Additional loss-channel releases");
  acct_eps->callback([&] { has_sigma_l_eps = sl1->count() > 0; });

  double mr_eps = 0, mr_delta = 1e-5, mr_q = 0.05, mr_sigma = 2.0, mr_sigma_l = 0.0;
  long long mr_extra = 0;
  auto* acct_mr = acct->add_subcommand("max-rounds", "Largest T within an epsilon budget");
  acct_mr->add_option("--eps", mr_eps, "Epsilon budget")->required();
  acct_mr->add_option("--delta", mr_delta, "Target delta")->required();
  acct_mr->add_option("--q", mr_q, "Sampling ratio")->required();
  acct_mr->add_option("--sigma", mr_sigma, "Gradient noise multiplier")->required();
  auto* sl2 = acct_mr->add_option("--sigma-l", mr_sigma_l, "Loss noise multiplier");
  acct_mr->add_option("--extra-loss-releases", mr_extra, "Additional loss-channel releases");
  acct_mr->callback([&] { has_sigma_l_mr = sl2->count() > 0; });

  // lambda-opt
  auto* lam = app.add_subcommand("lambda-opt", "Optimal fairness parameter from constants");
  std::string constants_path;
  double lam_rounds = 1.0;
  lam->add_option("--constants", constants_path, "Constants JSON file")->required();
  lam->add_option("--T", lam_rounds, "Round count for the bound prefactor");

  // partition
  auto* part = app.add_subcommand("partition", "Dirichlet-partition a dataset");
  std::string p_kind, p_images, p_labels, p_out;
  int p_pool = 0, p_dim = 0, p_classes = 0, p_n = 0;
  double p_beta = 0.1;
  std::uint64_t p_seed = 0;
  part->add_option("--dataset", p_kind, "mnist | fashion-idx | synthetic")->required();
  part->add_option("--images", p_images, "IDX images path");
  part->add_option("--labels", p_labels, "IDX labels path");
  part->add_option("--pool-size", p_pool, "Synthetic pool size");
  part->add_option("--dim", p_dim, "Synthetic feature dimension");
  part->add_option("--classes", p_classes, "Synthetic class count");
  part->add_option("--n", p_n, "Client count")->required();
  part->add_option("--beta", p_beta, "Dirichlet concentration")->required();
  part->add_option("--seed", p_seed, "Seed")->required();
  part->add_option("--out", p_out, "Output JSON path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(config_path, print_config,
                     workers_flag >= 0 ? std::optional<int>(workers_flag) : std::nullopt);
    if (acct_eps->parsed())
      return cmd_accountant_eps(
          q, sigma, has_sigma_l_eps ? std::optional<double>(sigma_l_val) : std::nullopt, T,
          delta, extra);
    if (acct_mr->parsed())
      return cmd_accountant_max_rounds(
          mr_eps, mr_delta, mr_q, mr_sigma,
          has_sigma_l_mr ? std::optional<double>(mr_sigma_l) : std::nullopt, mr_extra);
    if (lam->parsed()) return cmd_lambda_opt(constants_path, lam_rounds);
    if (part->parsed())
      return cmd_partition(p_kind, p_images, p_labels, p_pool, p_dim, p_classes, p_n, p_beta,
                           p_seed, p_out);
  } catch (const fedfdp::SchemaError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const fedfdp::InfeasibleBudget& e) {
    std::cerr << "infeasible budget: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
