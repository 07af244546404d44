#include "fedfdp/run_config.hpp"

#include <fstream>
#include <set>

#include "fedfdp/errors.hpp"

namespace fedfdp {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& path,
                    const std::set<std::string>& known) {
  for (const auto& [key, _] : obj.items())
    if (!known.count(key))
      throw SchemaError(path.empty() ? key : path + "." + key, "unknown field");
}

const json& require(const json& obj, const std::string& path, const std::string& key) {
  if (!obj.contains(key)) throw SchemaError(path + "." + key, "required field is missing");
  return obj.at(key);
}

double number_at(const json& obj, const std::string& path, const std::string& key) {
  const auto& v = require(obj, path, key);
  if (!v.is_number()) throw SchemaError(path + "." + key, "expected a number");
  return v.get<double>();
}

long long int_at(const json& obj, const std::string& path, const std::string& key) {
  const auto& v = require(obj, path, key);
  if (!v.is_number_integer()) throw SchemaError(path + "." + key, "expected an integer");
  return v.get<long long>();
}

std::string string_at(const json& obj, const std::string& path, const std::string& key) {
  const auto& v = require(obj, path, key);
  if (!v.is_string()) throw SchemaError(path + "." + key, "expected a string");
  return v.get<std::string>();
}

DatasetSpec parse_dataset(const json& obj) {
  DatasetSpec ds;
  ds.kind = string_at(obj, "dataset", "kind");
  if (ds.kind == "synthetic") {
    reject_unknown(obj, "dataset", {"kind", "pool_size", "dim", "classes"});
    ds.pool_size = static_cast<int>(int_at(obj, "dataset", "pool_size"));
    ds.dim = static_cast<int>(int_at(obj, "dataset", "dim"));
    ds.classes = static_cast<int>(int_at(obj, "dataset", "classes"));
  } else if (ds.kind == "synthetic-clients") {
    reject_unknown(obj, "dataset", {"kind", "per_client", "dim", "heterogeneity"});
    ds.per_client = static_cast<int>(int_at(obj, "dataset", "per_client"));
    ds.dim = static_cast<int>(int_at(obj, "dataset", "dim"));
    ds.heterogeneity = number_at(obj, "dataset", "heterogeneity");
    ds.classes = 2;
  } else if (ds.kind == "mnist" || ds.kind == "fashion-idx") {
    reject_unknown(obj, "dataset", {"kind", "images", "labels"});
    ds.images = string_at(obj, "dataset", "images");
    ds.labels = string_at(obj, "dataset", "labels");
    ds.dim = 784;
    ds.classes = 10;
  } else {
    throw SchemaError("dataset.kind", "must be synthetic, synthetic-clients, mnist or "
                                      "fashion-idx");
  }
  return ds;
}

}  // namespace

RunConfig parse_run_config(const json& root) {
  if (!root.is_object()) throw SchemaError("", "config root must be a JSON object");
  reject_unknown(root, "",
                 {"dataset", "model", "n_clients", "beta", "algorithm", "hyper", "batch_size",
                  "schedule", "seed", "workers", "eval_fraction", "output"});

  RunConfig cfg;
  cfg.dataset = parse_dataset(require(root, "", "dataset"));

  const auto& model = require(root, "", "model");
  reject_unknown(model, "model", {"kind", "hidden"});
  cfg.model_kind = string_at(model, "model", "kind");
  if (cfg.model_kind != "multinomial-logistic" && cfg.model_kind != "mlp-1-hidden")
    throw SchemaError("model.kind", "must be multinomial-logistic or mlp-1-hidden");
  if (cfg.model_kind == "mlp-1-hidden")
    cfg.hidden = static_cast<int>(int_at(model, "model", "hidden"));
  else if (model.contains("hidden"))
    throw SchemaError("model.hidden", "only valid for mlp-1-hidden");

  cfg.n_clients = static_cast<int>(int_at(root, "", "n_clients"));
  if (cfg.n_clients < 1) throw SchemaError("n_clients", "must be >= 1");
  if (root.contains("beta")) {
    cfg.beta = number_at(root, "", "beta");
    if (!(cfg.beta > 0.0)) throw SchemaError("beta", "must be > 0");
  }

  cfg.algorithm = string_at(root, "", "algorithm");
  if (cfg.algorithm != "fedavg" && cfg.algorithm != "fedfair" && cfg.algorithm != "fedfdp")
    throw SchemaError("algorithm", "must be fedavg, fedfair or fedfdp");
  const bool dp = cfg.algorithm == "fedfdp";

  const auto& hyper = require(root, "", "hyper");
  reject_unknown(hyper, "hyper",
                 {"eta", "lambda", "q", "C", "sigma", "C_l", "sigma_l", "T", "eps_budget",
                  "delta"});
  cfg.hyper.eta = number_at(hyper, "hyper", "eta");
  if (cfg.algorithm != "fedavg") cfg.hyper.lambda = number_at(hyper, "hyper", "lambda");
  if (dp) {
    cfg.hyper.sample_ratio = number_at(hyper, "hyper", "q");
    cfg.hyper.clip_bound = number_at(hyper, "hyper", "C");
    cfg.hyper.sigma = number_at(hyper, "hyper", "sigma");
    cfg.hyper.loss_clip_init = number_at(hyper, "hyper", "C_l");
    cfg.hyper.sigma_l = number_at(hyper, "hyper", "sigma_l");
    cfg.hyper.delta = number_at(hyper, "hyper", "delta");
    if (!(cfg.hyper.sample_ratio > 0.0 && cfg.hyper.sample_ratio <= 1.0))
      throw SchemaError("hyper.q", "must lie in (0, 1]");
    if (!(cfg.hyper.sigma > 0.0)) throw SchemaError("hyper.sigma", "must be > 0");
    if (!(cfg.hyper.sigma_l > 0.0)) throw SchemaError("hyper.sigma_l", "must be > 0");
    if (!(cfg.hyper.clip_bound > 0.0)) throw SchemaError("hyper.C", "must be > 0");
    if (!(cfg.hyper.loss_clip_init > 0.0)) throw SchemaError("hyper.C_l", "must be > 0");
    if (!(cfg.hyper.delta > 0.0 && cfg.hyper.delta < 1.0))
      throw SchemaError("hyper.delta", "must lie in (0, 1)");
  } else {
    for (const char* key : {"q", "C", "sigma", "C_l", "sigma_l", "eps_budget"})
      if (hyper.contains(key))
        throw SchemaError(std::string("hyper.") + key, "only valid for fedfdp");
  }

  const bool has_T = hyper.contains("T");
  const bool has_budget = hyper.contains("eps_budget");
  if (has_T == has_budget)
    throw SchemaError("hyper.T", "set exactly one of hyper.T and hyper.eps_budget");
  if (has_T) {
    cfg.hyper.rounds = int_at(hyper, "hyper", "T");
    if (*cfg.hyper.rounds < 0) throw SchemaError("hyper.T", "must be >= 0");
  } else {
    cfg.hyper.eps_budget = number_at(hyper, "hyper", "eps_budget");
    if (!(*cfg.hyper.eps_budget > 0.0)) throw SchemaError("hyper.eps_budget", "must be > 0");
  }

  if (root.contains("batch_size")) {
    cfg.batch_size = static_cast<int>(int_at(root, "", "batch_size"));
    if (cfg.batch_size < 1) throw SchemaError("batch_size", "must be >= 1");
  }

  if (root.contains("schedule")) {
    const auto& sched = root.at("schedule");
    reject_unknown(sched, "schedule", {"kind", "beta"});
    const auto kind = string_at(sched, "schedule", "kind");
    if (kind == "inverse-t") {
      cfg.schedule.inverse_t = true;
      cfg.schedule.beta = number_at(sched, "schedule", "beta");
      if (!(cfg.schedule.beta > 0.0)) throw SchemaError("schedule.beta", "must be > 0");
    } else if (kind == "fixed") {
      if (sched.contains("beta")) throw SchemaError("schedule.beta", "only valid for inverse-t");
    } else {
      throw SchemaError("schedule.kind", "must be fixed or inverse-t");
    }
  }

  cfg.seed = static_cast<std::uint64_t>(int_at(root, "", "seed"));
  if (root.contains("workers")) cfg.workers = static_cast<int>(int_at(root, "", "workers"));
  if (root.contains("eval_fraction")) {
    cfg.eval_fraction = number_at(root, "", "eval_fraction");
    if (cfg.eval_fraction < 0.0 || cfg.eval_fraction >= 1.0)
      throw SchemaError("eval_fraction", "must lie in [0, 1)");
  }
  if (root.contains("output")) {
    const auto& out = root.at("output");
    reject_unknown(out, "output", {"csv", "jsonl"});
    if (out.contains("csv")) cfg.out_csv = string_at(out, "output", "csv");
    if (out.contains("jsonl")) cfg.out_jsonl = string_at(out, "output", "jsonl");
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json root;
  try {
    in >> root;
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  return parse_run_config(root);
}

json to_json(const RunConfig& cfg) {
  json ds{{"kind", cfg.dataset.kind}};
  if (cfg.dataset.kind == "synthetic") {
    ds["pool_size"] = cfg.dataset.pool_size;
    ds["dim"] = cfg.dataset.dim;
    ds["classes"] = cfg.dataset.classes;
  } else if (cfg.dataset.kind == "synthetic-clients") {
    ds["per_client"] = cfg.dataset.per_client;
    ds["dim"] = cfg.dataset.dim;
    ds["heterogeneity"] = cfg.dataset.heterogeneity;
  } else {
    ds["images"] = cfg.dataset.images;
    ds["labels"] = cfg.dataset.labels;
  }

  json model{{"kind", cfg.model_kind}};
  if (cfg.model_kind == "mlp-1-hidden") model["hidden"] = cfg.hidden;

  json hyper{{"eta", cfg.hyper.eta}};
  if (cfg.algorithm != "fedavg") hyper["lambda"] = cfg.hyper.lambda;
  if (cfg.algorithm == "fedfdp") {
    hyper["q"] = cfg.hyper.sample_ratio;
    hyper["C"] = cfg.hyper.clip_bound;
    hyper["sigma"] = cfg.hyper.sigma;
    hyper["C_l"] = cfg.hyper.loss_clip_init;
    hyper["sigma_l"] = cfg.hyper.sigma_l;
    hyper["delta"] = cfg.hyper.delta;
  }
  if (cfg.hyper.rounds) hyper["T"] = *cfg.hyper.rounds;
  if (cfg.hyper.eps_budget) hyper["eps_budget"] = *cfg.hyper.eps_budget;

  json root{{"dataset", ds},
            {"model", model},
            {"n_clients", cfg.n_clients},
            {"beta", cfg.beta},
            {"algorithm", cfg.algorithm},
            {"hyper", hyper},
            {"batch_size", cfg.batch_size},
            {"seed", cfg.seed},
            {"workers", cfg.workers},
            {"eval_fraction", cfg.eval_fraction}};
  if (cfg.schedule.inverse_t)
    root["schedule"] = json{{"kind", "inverse-t"}, {"beta", cfg.schedule.beta}};
  else
    root["schedule"] = json{{"kind", "fixed"}};
  if (!cfg.out_csv.empty() || !cfg.out_jsonl.empty()) {
    json out = json::object();
    if (!cfg.out_csv.empty()) out["csv"] = cfg.out_csv;
    if (!cfg.out_jsonl.empty()) out["jsonl"] = cfg.out_jsonl;
    root["output"] = out;
  }
  return root;
}

ExperimentConfig materialize(const RunConfig& cfg) {
  ExperimentConfig exp;
  exp.algorithm = algorithm_from_string(cfg.algorithm);
  exp.hyper = cfg.hyper;
  exp.schedule = cfg.schedule;
  exp.batch_size = cfg.batch_size;
  exp.eval_fraction = cfg.eval_fraction;
  exp.seed = cfg.seed;
  exp.workers = cfg.workers;

  if (cfg.dataset.kind == "synthetic-clients") {
    auto synth = synthetic_convex(cfg.n_clients, cfg.dataset.per_client, cfg.dataset.dim,
                                  cfg.dataset.heterogeneity, cfg.seed);
    exp.clients = std::move(synth.clients);
  } else {
    std::vector<Example> pool;
    if (cfg.dataset.kind == "synthetic") {
      pool = synthetic_pool(cfg.dataset.pool_size, cfg.dataset.dim, cfg.dataset.classes,
                            cfg.seed);
    } else {
      pool = load_idx(cfg.dataset.images, cfg.dataset.labels);
    }
    std::vector<int> labels(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) labels[i] = pool[i].label;
    const auto parts = dirichlet_partition(labels, {cfg.n_clients, cfg.beta, cfg.seed});
    exp.clients = make_clients(pool, parts);
  }

  exp.model.kind = model_kind_from_string(cfg.model_kind);
  exp.model.input_dim = cfg.dataset.dim;
  exp.model.classes = cfg.dataset.classes;
  exp.model.hidden = cfg.hidden;
  return exp;
}

namespace {
std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

void write_metrics_csv(const std::string& path, const std::vector<RoundMetrics>& rounds) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file " + path);
  out << "round,global_train_loss,eps_spent,psi_train,psi_eval";
  const std::size_t n = rounds.empty() ? 0 : rounds.front().client_eval_loss.size();
  for (std::size_t c = 0; c < n; ++c)
    out << ",client" << c << "_loss,client" << c << "_acc";
  out << "\n";
  for (const auto& m : rounds) {
    out << m.round << ',' << format_double(m.global_train_loss) << ','
        << format_double(m.eps_spent) << ',' << format_double(m.psi_train) << ','
        << format_double(m.psi_eval);
    for (std::size_t c = 0; c < n; ++c)
      out << ',' << format_double(m.client_eval_loss[c]) << ','
          << format_double(m.client_eval_acc[c]);
    out << "\n";
  }
}

void write_metrics_jsonl(const std::string& path, const std::vector<RoundMetrics>& rounds) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file " + path);
  for (const auto& m : rounds) {
    json line{{"round", m.round},
              {"global_train_loss", m.global_train_loss},
              {"eps_spent", m.eps_spent},
              {"psi_train", m.psi_train},
              {"psi_eval", m.psi_eval},
              {"client_eval_loss", m.client_eval_loss},
              {"client_eval_acc", m.client_eval_acc},
              {"batch_sizes", m.batch_sizes}};
    out << line.dump() << "\n";
  }
}

}  // namespace fedfdp
