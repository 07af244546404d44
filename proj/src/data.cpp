#include "fedfdp/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "fedfdp/errors.hpp"

namespace fedfdp {

namespace {

constexpr std::uint32_t kImagesMagic = 2051;
constexpr std::uint32_t kLabelsMagic = 2049;

std::uint32_t read_u32_be(std::ifstream& in, std::size_t& offset, const std::string& what) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (in.gcount() != 4) throw FormatError("truncated file while reading " + what, offset);
  offset += 4;
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

// One full allocation pass: per class, Dirichlet proportions over clients.
std::vector<std::vector<std::size_t>> allocate_once(
    const std::vector<std::vector<std::size_t>>& by_class, int n_clients, double beta,
    Rng& rng) {
  std::vector<std::vector<std::size_t>> parts(n_clients);
  for (const auto& class_indices : by_class) {
    const auto props = rng.next_dirichlet(beta, static_cast<std::size_t>(n_clients));
    // Cumulative cut points over the class's examples.
    const std::size_t m = class_indices.size();
    std::size_t start = 0;
    double cum = 0.0;
    for (int c = 0; c < n_clients; ++c) {
      cum += props[c];
      const std::size_t end =
          (c == n_clients - 1) ? m
                               : std::min(m, static_cast<std::size_t>(std::llround(cum * m)));
      for (std::size_t i = start; i < end; ++i) parts[c].push_back(class_indices[i]);
      start = std::max(start, end);
    }
  }
  return parts;
}

}  // namespace

std::vector<std::vector<std::size_t>> dirichlet_partition(const std::vector<int>& labels,
                                                          const PartitionSpec& spec) {
  if (spec.clients < 1) throw ArgumentError("partition: need at least one client");
  if (!(spec.beta > 0.0)) throw ArgumentError("partition: beta must be > 0");
  if (labels.size() < static_cast<std::size_t>(spec.clients))
    throw ArgumentError("partition: fewer examples than clients");

  const int num_classes = 1 + *std::max_element(labels.begin(), labels.end());
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) throw ArgumentError("partition: negative label");
    by_class[labels[i]].push_back(i);
  }

  Rng rng = substream(spec.seed, 0, 0, StreamPurpose::kPartition);
  for (auto& cls : by_class) rng.shuffle(cls);

  std::vector<std::vector<std::size_t>> parts;
  for (int attempt = 0; attempt < 100; ++attempt) {
    parts = allocate_once(by_class, spec.clients, spec.beta, rng);
    const bool any_empty =
        std::any_of(parts.begin(), parts.end(), [](const auto& p) { return p.empty(); });
    if (!any_empty) return parts;
  }

  // Persistent starvation (tiny datasets): take single examples from the
  // currently largest client.
  for (auto& part : parts) {
    while (part.empty()) {
      auto& largest = *std::max_element(
          parts.begin(), parts.end(),
          [](const auto& a, const auto& b) { return a.size() < b.size(); });
      if (largest.size() <= 1) throw ArgumentError("partition: not enough examples to go round");
      part.push_back(largest.back());
      largest.pop_back();
    }
  }
  return parts;
}

std::vector<Example> load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream images(images_path, std::ios::binary);
  if (!images) throw FormatError("cannot open images file " + images_path, 0);
  std::size_t img_off = 0;
  const auto img_magic = read_u32_be(images, img_off, "images magic");
  if (img_magic != kImagesMagic)
    throw FormatError("bad images magic " + std::to_string(img_magic) + " (want 2051)", 0);
  const auto n_images = read_u32_be(images, img_off, "image count");
  const auto rows = read_u32_be(images, img_off, "row count");
  const auto cols = read_u32_be(images, img_off, "column count");

  std::ifstream labels(labels_path, std::ios::binary);
  if (!labels) throw FormatError("cannot open labels file " + labels_path, 0);
  std::size_t lbl_off = 0;
  const auto lbl_magic = read_u32_be(labels, lbl_off, "labels magic");
  if (lbl_magic != kLabelsMagic)
    throw FormatError("bad labels magic " + std::to_string(lbl_magic) + " (want 2049)", 0);
  const auto n_labels = read_u32_be(labels, lbl_off, "label count");
  if (n_images != n_labels)
    throw FormatError("image count " + std::to_string(n_images) + " != label count " +
                          std::to_string(n_labels),
                      lbl_off);

  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  std::vector<Example> out(n_images);
  std::vector<unsigned char> buf(pixels);
  for (std::uint32_t i = 0; i < n_images; ++i) {
    images.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
    if (images.gcount() != static_cast<std::streamsize>(pixels))
      throw FormatError("truncated image data at image " + std::to_string(i), img_off);
    img_off += pixels;
    auto& ex = out[i];
    ex.features.resize(pixels);
    for (std::size_t p = 0; p < pixels; ++p) ex.features[p] = buf[p] / 255.0;
    char lbl = 0;
    labels.read(&lbl, 1);
    if (labels.gcount() != 1)
      throw FormatError("truncated label data at label " + std::to_string(i), lbl_off);
    lbl_off += 1;
    ex.label = static_cast<unsigned char>(lbl);
  }
  return out;
}

std::vector<ClientDataset> make_clients(const std::vector<Example>& pool,
                                        const std::vector<std::vector<std::size_t>>& parts) {
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  std::vector<ClientDataset> clients(parts.size());
  for (std::size_t c = 0; c < parts.size(); ++c) {
    clients[c].client_id = static_cast<int>(c);
    clients[c].examples.reserve(parts[c].size());
    for (auto idx : parts[c]) clients[c].examples.push_back(pool[idx]);
    clients[c].weight = static_cast<double>(parts[c].size()) / static_cast<double>(total);
  }
  return clients;
}

namespace {

// Sample a label from softmax class probabilities under `truth`.
int sample_label(const ParamVector& truth, const ModelSpec& spec, Example& x, Rng& rng) {
  x.label = 0;  // probe label; predict ignores it
  const auto probs = predict(truth, spec, x);
  double u = rng.next_double();
  for (std::size_t k = 0; k < probs.size(); ++k) {
    u -= probs[k];
    if (u < 0.0) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

SyntheticResult synthetic_convex(int clients, int per_client, int dim, double heterogeneity,
                                 std::uint64_t seed) {
  if (clients < 1 || per_client < 1 || dim < 1)
    throw ArgumentError("synthetic_convex: counts must be positive");

  SyntheticResult result;
  result.model = ModelSpec{ModelKind::kMultinomialLogistic, dim, 2, 0};

  Rng truth_rng = substream(seed, 0, 0, StreamPurpose::kSynthData);
  // Shared ground truth with O(1) logits over [0,1] features; the trailing
  // entries are the class biases.
  result.shared_truth.resize(result.model.param_count());
  for (auto& v : result.shared_truth) v = 4.0 * (truth_rng.next_double() - 0.5);

  const std::size_t total = static_cast<std::size_t>(clients) * per_client;
  result.clients.resize(clients);
  result.client_truths.resize(clients);
  for (int c = 0; c < clients; ++c) {
    Rng rng = substream(seed, static_cast<std::uint64_t>(c) + 1, 0, StreamPurpose::kSynthData);
    auto& truth = result.client_truths[c];
    truth = result.shared_truth;
    for (auto& v : truth) v += heterogeneity * rng.next_gaussian();

    auto& client = result.clients[c];
    client.client_id = c;
    client.weight = static_cast<double>(per_client) / static_cast<double>(total);
    client.examples.resize(per_client);
    for (auto& ex : client.examples) {
      ex.features.resize(dim);
      for (auto& f : ex.features) f = rng.next_double();
      ex.label = sample_label(truth, result.model, ex, rng);
    }
  }
  return result;
}

std::vector<Example> synthetic_pool(int pool_size, int dim, int classes, std::uint64_t seed) {
  if (pool_size < 1 || dim < 1 || classes < 2)
    throw ArgumentError("synthetic_pool: need pool_size >= 1, dim >= 1, classes >= 2");
  const ModelSpec spec{ModelKind::kMultinomialLogistic, dim, classes, 0};
  Rng rng = substream(seed, 0, 0, StreamPurpose::kSynthData);
  ParamVector truth(spec.param_count());
  for (auto& v : truth) v = 6.0 * (rng.next_double() - 0.5);

  std::vector<Example> pool(pool_size);
  for (auto& ex : pool) {
    ex.features.resize(dim);
    for (auto& f : ex.features) f = rng.next_double();
    ex.label = sample_label(truth, spec, ex, rng);
  }
  return pool;
}

std::vector<ClientDataset> synthetic_clusters(int clients, int per_client, int dim,
                                              double spread, std::uint64_t seed) {
  if (clients < 1 || per_client < 1 || dim < 1)
    throw ArgumentError("synthetic_clusters: counts must be positive");
  const std::size_t total = static_cast<std::size_t>(clients) * per_client;
  std::vector<ClientDataset> out(clients);
  for (int c = 0; c < clients; ++c) {
    Rng rng = substream(seed, static_cast<std::uint64_t>(c), 0, StreamPurpose::kSynthData);
    std::vector<double> center(dim);
    for (auto& v : center) v = rng.next_double();
    auto& client = out[c];
    client.client_id = c;
    client.weight = static_cast<double>(per_client) / static_cast<double>(total);
    client.examples.resize(per_client);
    for (auto& ex : client.examples) {
      ex.features.resize(dim);
      for (int j = 0; j < dim; ++j) {
        const double v = center[j] + spread * (rng.next_double() - 0.5);
        ex.features[j] = std::clamp(v, 0.0, 1.0);
      }
      ex.label = 0;
    }
  }
  return out;
}

}  // namespace fedfdp
