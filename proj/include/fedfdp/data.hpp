#ifndef FEDFDP_DATA_HPP
#define FEDFDP_DATA_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fedfdp/model.hpp"

namespace fedfdp {

// One client's shard. `weight` is the exact count ratio |D_i| / |D|.
struct ClientDataset {
  int client_id = 0;
  std::vector<Example> examples;
  double weight = 0.0;
};

struct PartitionSpec {
  int clients = 2;       // N >= 2 (N = 1 degenerates to a single owner)
  double beta = 0.1;     // Dirichlet concentration, > 0
  std::uint64_t seed = 0;
};

// Label-skewed partition: for each class, proportions drawn from
// Dirichlet(beta, ..., beta) decide how that class's examples split across
// clients. Result is a disjoint cover of all indices; an allocation that
// starves a client is redrawn (up to 100 times), after which single examples
// move over from the largest client.
std::vector<std::vector<std::size_t>> dirichlet_partition(const std::vector<int>& labels,
                                                          const PartitionSpec& spec);

// IDX image/label pair (big-endian headers, magic 2051/2049). Pixels are
// scaled to [0, 1].
std::vector<Example> load_idx(const std::string& images_path, const std::string& labels_path);

// Client shards from index sets, with weights as exact count ratios.
std::vector<ClientDataset> make_clients(const std::vector<Example>& pool,
                                        const std::vector<std::vector<std::size_t>>& parts);

struct SyntheticResult {
  std::vector<ClientDataset> clients;
  ParamVector shared_truth;                  // generator parameters (heterogeneity = 0)
  std::vector<ParamVector> client_truths;    // per-client generator parameters
  ModelSpec model;
};

// Binary logistic data with per-client ground truths that drift apart as
// `heterogeneity` grows. Features are uniform in [0, 1]; labels are sampled
// from the client's ground-truth class probabilities.
SyntheticResult synthetic_convex(int clients, int per_client, int dim, double heterogeneity,
                                 std::uint64_t seed);

// Multiclass logistic pool (single ground truth) for Dirichlet partitioning.
std::vector<Example> synthetic_pool(int pool_size, int dim, int classes, std::uint64_t seed);

// Cluster points in [0, 1]^dim for the squared-distance model: client i's
// points concentrate around its own center. Labels are unused (set to 0).
std::vector<ClientDataset> synthetic_clusters(int clients, int per_client, int dim,
                                              double spread, std::uint64_t seed);

}  // namespace fedfdp

#endif  // FEDFDP_DATA_HPP
