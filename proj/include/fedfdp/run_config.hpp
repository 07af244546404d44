#ifndef FEDFDP_RUN_CONFIG_HPP
#define FEDFDP_RUN_CONFIG_HPP

#include <string>

#include <json.hpp>

#include "fedfdp/federation.hpp"

namespace fedfdp {

struct DatasetSpec {
  std::string kind;  // synthetic | synthetic-clients | mnist | fashion-idx
  int pool_size = 0;
  int dim = 0;
  int classes = 0;
  int per_client = 0;
  double heterogeneity = 0.0;
  std::string images;
  std::string labels;
};

// Operator-facing run description, parsed fail-closed: unknown fields and
// missing required fields are schema errors naming the offending path.
struct RunConfig {
  DatasetSpec dataset;
  std::string model_kind = "multinomial-logistic";
  int hidden = 0;
  int n_clients = 0;
  double beta = 0.1;
  std::string algorithm;
  HyperParams hyper;
  int batch_size = 32;
  ScheduleSpec schedule;
  std::uint64_t seed = 0;
  int workers = 0;
  double eval_fraction = 0.2;
  std::string out_csv;
  std::string out_jsonl;
};

RunConfig parse_run_config(const nlohmann::json& root);
RunConfig load_run_config(const std::string& path);
nlohmann::json to_json(const RunConfig& config);

// Loads/generates the dataset, partitions it, and assembles the federation
// inputs. Heavy I/O happens here, not in parsing.
ExperimentConfig materialize(const RunConfig& config);

void write_metrics_csv(const std::string& path, const std::vector<RoundMetrics>& rounds);
void write_metrics_jsonl(const std::string& path, const std::vector<RoundMetrics>& rounds);

}  // namespace fedfdp

#endif  // FEDFDP_RUN_CONFIG_HPP
