#include "lptgnn/runconfig.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "lptgnn/errors.hpp"
#include "lptgnn/filtration.hpp"
#include "lptgnn/persistence_image.hpp"

namespace lptgnn {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError("unknown config key '" + where + it.key() + "'");
    }
  }
}

template <typename T>
T field(const json& j, const std::string& where, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + where + key + "' has the wrong type");
  }
}

}  // namespace

std::string default_data_root() {
  const char* env = std::getenv("LPTGNN_DATA_ROOT");
  if (env != nullptr && env[0] != '\0') return env;
  return "data";
}

std::string resolved_data_root(const RunConfig& config) {
  return config.data_root.empty() ? default_data_root() : config.data_root;
}

std::string dataset_code(const std::string& dataset_name) {
  if (dataset_name == "COX2") return "C";
  if (dataset_name == "COX2_MD") return "CM";
  if (dataset_name == "BZR") return "B";
  if (dataset_name == "BZR_MD") return "BM";
  if (dataset_name == "PROTEINS") return "P";
  if (dataset_name == "DD") return "D";
  if (dataset_name == "Mutagenicity") return "M";
  return dataset_name;
}

std::string derived_task_name(const RunConfig& config) {
  if (config.split == "pair") {
    return dataset_code(config.source_dataset) + "→" + dataset_code(config.target_dataset);
  }
  if (config.split == "quartiles") {
    const std::string code = dataset_code(config.dataset);
    return code + std::to_string(config.source_quartile) + "→" + code +
           std::to_string(config.target_quartile);
  }
  return dataset_code(config.dataset) + "-subpop";
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  check_keys(j, "",
             {"task", "data_root", "split", "dataset", "source_dataset", "target_dataset",
              "source_quartile", "target_quartile", "out_dir", "seed", "encoder", "model",
              "topology", "train"});

  RunConfig config;
  config.task = field<std::string>(j, "", "task", "");
  config.data_root = field<std::string>(j, "", "data_root", "");
  config.split = field<std::string>(j, "", "split", config.split);
  config.dataset = field<std::string>(j, "", "dataset", "");
  config.source_dataset = field<std::string>(j, "", "source_dataset", "");
  config.target_dataset = field<std::string>(j, "", "target_dataset", "");
  config.source_quartile = field<int>(j, "", "source_quartile", config.source_quartile);
  config.target_quartile = field<int>(j, "", "target_quartile", config.target_quartile);
  config.out_dir = field<std::string>(j, "", "out_dir", config.out_dir);
  config.train.seed = field<std::uint64_t>(j, "", "seed", config.train.seed);
  config.model.encoder = encoder_from_string(field<std::string>(j, "", "encoder", "tgnn"));

  if (j.contains("model")) {
    const json& m = j.at("model");
    if (!m.is_object()) throw ConfigError("config key 'model' must be an object");
    check_keys(m, "model.",
               {"feature_dim", "class_count", "rep_dim", "dropout", "gcn_layers",
                "reshape_base", "adj_power", "ttl_structure", "ttl_hidden", "conv_channels",
                "topo_ttl_out", "gin_layers", "gin_hidden"});
    ModelConfig& mc = config.model;
    mc.feature_dim = field<std::int64_t>(m, "model.", "feature_dim", mc.feature_dim);
    mc.class_count = field<int>(m, "model.", "class_count", mc.class_count);
    mc.rep_dim = field<std::int64_t>(m, "model.", "rep_dim", mc.rep_dim);
    mc.dropout = field<double>(m, "model.", "dropout", mc.dropout);
    mc.gcn_layers = field<int>(m, "model.", "gcn_layers", mc.gcn_layers);
    mc.reshape_base = field<std::int64_t>(m, "model.", "reshape_base", mc.reshape_base);
    mc.adj_power = field<int>(m, "model.", "adj_power", mc.adj_power);
    mc.ttl_structure = weight_structure_from_string(
        field<std::string>(m, "model.", "ttl_structure", to_string(mc.ttl_structure)));
    mc.ttl_hidden = field<int>(m, "model.", "ttl_hidden", mc.ttl_hidden);
    mc.conv_channels = field<std::int64_t>(m, "model.", "conv_channels", mc.conv_channels);
    mc.topo_ttl_out = field<Shape>(m, "model.", "topo_ttl_out", mc.topo_ttl_out);
    mc.gin_layers = field<int>(m, "model.", "gin_layers", mc.gin_layers);
    mc.gin_hidden = field<std::int64_t>(m, "model.", "gin_hidden", mc.gin_hidden);
  }

  if (j.contains("topology")) {
    const json& t = j.at("topology");
    if (!t.is_object()) throw ConfigError("config key 'topology' must be an object");
    check_keys(t, "topology.", {"filtrations", "q", "resolution", "weight"});
    TopologyConfig& tc = config.model.topology;
    if (t.contains("filtrations")) {
      const std::vector<std::string> names =
          field<std::vector<std::string>>(t, "topology.", "filtrations", {});
      if (names.empty()) throw ConfigError("topology.filtrations must be nonempty");
      tc.filtrations.clear();
      std::set<std::string> seen;
      for (const std::string& name : names) {
        if (!seen.insert(name).second) {
          throw ConfigError("duplicate filtration '" + name + "'");
        }
        tc.filtrations.push_back(filtration_from_string(name));
      }
    }
    tc.q = field<int>(t, "topology.", "q", tc.q);
    tc.resolution = field<int>(t, "topology.", "resolution", tc.resolution);
    tc.weight = pi_weight_from_string(
        field<std::string>(t, "topology.", "weight", to_string(tc.weight)));
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    if (!t.is_object()) throw ConfigError("config key 'train' must be an object");
    check_keys(t, "train.",
               {"learning_rate", "batch_size", "max_epochs", "patience",
                "confidence_threshold", "disable_conv", "disable_topo", "disable_sup",
                "disable_lp"});
    TrainConfig& tc = config.train;
    tc.learning_rate = field<double>(t, "train.", "learning_rate", tc.learning_rate);
    tc.batch_size = field<std::int64_t>(t, "train.", "batch_size", tc.batch_size);
    tc.max_epochs = field<int>(t, "train.", "max_epochs", tc.max_epochs);
    tc.patience = field<int>(t, "train.", "patience", tc.patience);
    tc.confidence_threshold =
        field<double>(t, "train.", "confidence_threshold", tc.confidence_threshold);
    tc.disable_conv = field<bool>(t, "train.", "disable_conv", tc.disable_conv);
    tc.disable_topo = field<bool>(t, "train.", "disable_topo", tc.disable_topo);
    tc.disable_sup = field<bool>(t, "train.", "disable_sup", tc.disable_sup);
    tc.disable_lp = field<bool>(t, "train.", "disable_lp", tc.disable_lp);
  }

  if (config.split != "pair" && config.split != "quartiles" && config.split != "subpopulation") {
    throw ConfigError("split must be pair, quartiles, or subpopulation, got '" + config.split +
                      "'");
  }
  if (config.split == "pair") {
    if (config.source_dataset.empty() || config.target_dataset.empty()) {
      throw ConfigError("pair split needs source_dataset and target_dataset");
    }
  } else if (config.dataset.empty()) {
    throw ConfigError(config.split + " split needs a dataset");
  }
  if (config.split == "quartiles") {
    if (config.source_quartile < 0 || config.source_quartile > 3 ||
        config.target_quartile < 0 || config.target_quartile > 3) {
      throw ConfigError("quartile indices must lie in 0..3");
    }
    if (config.source_quartile == config.target_quartile) {
      throw ConfigError("source and target quartiles must differ");
    }
  }
  if (config.train.confidence_threshold > 1.0) {
    throw ConfigError("confidence_threshold must lie in (0, 1]");
  }

  validate_model_config(config.model);
  validate_train_config(config.train, config.model);
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

ordered_json run_config_to_json(const RunConfig& config) {
  ordered_json j;
  j["task"] = config.task.empty() ? derived_task_name(config) : config.task;
  j["data_root"] = resolved_data_root(config);
  j["split"] = config.split;
  if (config.split == "pair") {
    j["source_dataset"] = config.source_dataset;
    j["target_dataset"] = config.target_dataset;
  } else {
    j["dataset"] = config.dataset;
  }
  if (config.split == "quartiles") {
    j["source_quartile"] = config.source_quartile;
    j["target_quartile"] = config.target_quartile;
  }
  j["out_dir"] = config.out_dir;
  j["seed"] = config.train.seed;
  j["encoder"] = to_string(config.model.encoder);

  const ModelConfig& mc = config.model;
  ordered_json m;
  m["feature_dim"] = mc.feature_dim;
  m["class_count"] = mc.class_count;
  m["rep_dim"] = mc.rep_dim;
  m["dropout"] = mc.dropout;
  m["gcn_layers"] = mc.gcn_layers;
  m["reshape_base"] = mc.reshape_base;
  m["adj_power"] = mc.adj_power;
  m["ttl_structure"] = to_string(mc.ttl_structure);
  m["ttl_hidden"] = mc.ttl_hidden;
  m["conv_channels"] = mc.conv_channels;
  m["topo_ttl_out"] = mc.topo_ttl_out;
  m["gin_layers"] = mc.gin_layers;
  m["gin_hidden"] = mc.gin_hidden;
  j["model"] = m;

  const TopologyConfig& tc = mc.topology;
  ordered_json t;
  std::vector<std::string> filtration_names;
  for (FiltrationKind kind : tc.filtrations) filtration_names.push_back(to_string(kind));
  t["filtrations"] = filtration_names;
  t["q"] = tc.q;
  t["resolution"] = tc.resolution;
  t["weight"] = to_string(tc.weight);
  j["topology"] = t;

  const TrainConfig& tr = config.train;
  ordered_json tj;
  tj["learning_rate"] = tr.learning_rate;
  tj["batch_size"] = tr.batch_size;
  tj["max_epochs"] = tr.max_epochs;
  tj["patience"] = tr.patience;
  tj["confidence_threshold"] = tr.confidence_threshold;
  tj["disable_conv"] = tr.disable_conv;
  tj["disable_topo"] = tr.disable_topo;
  tj["disable_sup"] = tr.disable_sup;
  tj["disable_lp"] = tr.disable_lp;
  j["train"] = tj;
  return j;
}

ordered_json build_manifest(const RunConfig& config, const RunRealized& realized) {
  ordered_json manifest;
  manifest["config"] = run_config_to_json(config);

  ordered_json data;
  data["feature_dim"] = realized.feature_dim;
  data["class_count"] = realized.class_count;
  data["source_size"] = realized.source_size;
  data["target_size"] = realized.target_size;
  data["source_class_counts"] = realized.source_class_counts;
  data["target_class_counts"] = realized.target_class_counts;
  if (realized.has_subpopulation) {
    ordered_json sub;
    sub["source_neg"] = realized.subpopulation.source_neg;
    sub["source_pos"] = realized.subpopulation.source_pos;
    sub["target_neg"] = realized.subpopulation.target_neg;
    sub["target_pos"] = realized.subpopulation.target_pos;
    data["subpopulation"] = sub;
  }
  data["parameter_count"] = realized.parameter_count;
  manifest["data"] = data;

  ordered_json conventions;
  conventions["branch_combine"] = "elementwise mean";
  conventions["adjacency_normalization"] = "symmetric D^-1/2 (A+I) D^-1/2";
  conventions["pi_window"] = "[min f, max f]^2 per filtration, ±0.5 when degenerate";
  conventions["pi_bandwidth"] = "window width / resolution";
  conventions["essential_bars"] = "capped at the maximum filtration value";
  conventions["h0_tiebreak"] = "equal-birth merges keep the lower witness node";
  conventions["batchnorm_momentum"] = 0.9;
  conventions["adam"] = {{"beta1", 0.9}, {"beta2", 0.999}, {"epsilon", 1e-8}};
  conventions["rng_streams"] = {{"init", 1},       {"dropout", 2}, {"source_shuffle", 3},
                                {"target_shuffle", 4}, {"subpopulation", 10}};
  manifest["conventions"] = conventions;
  return manifest;
}

}  // namespace lptgnn
