#include "lptgnn/encoders.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "lptgnn/errors.hpp"

namespace lptgnn {

namespace {

std::string gcn_name(int layer) { return "conv.gcn.l" + std::to_string(layer); }
std::string gin_name(int layer) { return "gin.l" + std::to_string(layer); }

}  // namespace

EncoderKind encoder_from_string(const std::string& s) {
  if (s == "tgnn") return EncoderKind::Tgnn;
  if (s == "gin") return EncoderKind::Gin;
  throw ConfigError("unknown encoder '" + s + "' (expected tgnn or gin)");
}

std::string to_string(EncoderKind kind) {
  return kind == EncoderKind::Tgnn ? "tgnn" : "gin";
}

void validate_model_config(const ModelConfig& config) {
  if (config.feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
  if (config.class_count < 2) throw ConfigError("class_count must be >= 2");
  if (config.rep_dim < 1) throw ConfigError("rep_dim must be >= 1");
  if (config.dropout < 0.0 || config.dropout >= 1.0) {
    throw ConfigError("dropout must lie in [0, 1)");
  }
  if (config.gcn_layers < 1) throw ConfigError("gcn_layers must be >= 1");
  if (config.reshape_base < 1) throw ConfigError("reshape_base must be >= 1");
  if (config.adj_power < 1) throw ConfigError("adj_power must be >= 1");
  if (config.ttl_hidden < 1) throw ConfigError("ttl_hidden must be >= 1");
  if (config.conv_channels < 1) throw ConfigError("conv_channels must be >= 1");
  if (config.topo_ttl_out.empty()) throw ConfigError("topo_ttl_out must be nonempty");
  for (std::int64_t extent : config.topo_ttl_out) {
    if (extent < 1) throw ConfigError("topo_ttl_out extents must be >= 1");
  }
  if (config.gin_layers < 1) throw ConfigError("gin_layers must be >= 1");
  if (config.gin_hidden < 1) throw ConfigError("gin_hidden must be >= 1");
  validate_topology(config.topology);
}

Model::Model(ModelConfig config) : config_(std::move(config)) {
  validate_model_config(config_);
  const std::int64_t layers = config_.gcn_layers;
  const std::int64_t base = config_.reshape_base;
  conv_ttl_ = make_ttl({layers, base, base}, {layers, base, base}, config_.ttl_hidden,
                       config_.ttl_structure);

  const std::int64_t pooled = config_.topology.resolution / 2;
  const Shape topo_in{config_.conv_channels, pooled, pooled};
  topo_ttl_.layers.push_back(make_lowrank(config_.ttl_structure, topo_in, config_.topo_ttl_out));
  for (int i = 1; i < config_.ttl_hidden; ++i) {
    topo_ttl_.layers.push_back(
        make_lowrank(config_.ttl_structure, config_.topo_ttl_out, config_.topo_ttl_out));
  }
  topo_ttl_.layers.push_back(
      make_lowrank(config_.ttl_structure, config_.topo_ttl_out, config_.topo_ttl_out));
}

void Model::init_params(ParamStore& store, SplitRng& rng) const {
  const ModelConfig& c = config_;
  if (c.encoder == EncoderKind::Tgnn) {
    const std::int64_t width = c.reshape_base * c.reshape_base;
    std::int64_t in = c.feature_dim;
    for (int i = 0; i < c.gcn_layers; ++i) {
      store.create(gcn_name(i) + ".w",
                   normal_tensor({in, width}, glorot_std(in, width), rng));
      in = width;
    }
    ttl_init(store, "conv.ttl", conv_ttl_, rng);
    const std::int64_t conv_flat = c.gcn_layers * width;
    store.create("conv.out.w",
                 normal_tensor({conv_flat, c.rep_dim}, glorot_std(conv_flat, c.rep_dim), rng));
    store.create("conv.out.bias", Tensor::zeros({c.rep_dim}));

    const std::int64_t k = c.topology.k();
    store.create("topo.cnn.w",
                 normal_tensor({c.conv_channels, k, 3, 3},
                               glorot_std(k * 9, c.conv_channels * 9), rng));
    store.create("topo.cnn.bias", Tensor::zeros({c.conv_channels}));
    ttl_init(store, "topo.ttl", topo_ttl_, rng);
    const std::int64_t topo_flat = shape_numel(c.topo_ttl_out);
    store.create("topo.out.w",
                 normal_tensor({topo_flat, c.rep_dim}, glorot_std(topo_flat, c.rep_dim), rng));
    store.create("topo.out.bias", Tensor::zeros({c.rep_dim}));
  } else {
    std::int64_t in = c.feature_dim;
    for (int i = 0; i < c.gin_layers; ++i) {
      const std::string p = gin_name(i);
      store.create(p + ".eps", Tensor::zeros({}));
      store.create(p + ".m1.w",
                   normal_tensor({in, c.gin_hidden}, glorot_std(in, c.gin_hidden), rng));
      store.create(p + ".m1.bias", Tensor::zeros({c.gin_hidden}));
      store.create(p + ".m2.w", normal_tensor({c.gin_hidden, c.gin_hidden},
                                              glorot_std(c.gin_hidden, c.gin_hidden), rng));
      store.create(p + ".m2.bias", Tensor::zeros({c.gin_hidden}));
      in = c.gin_hidden;
    }
    store.create("gin.out.w",
                 normal_tensor({c.gin_hidden, c.rep_dim}, glorot_std(c.gin_hidden, c.rep_dim), rng));
    store.create("gin.out.bias", Tensor::zeros({c.rep_dim}));
  }

  store.create("mlp.fc1.w",
               normal_tensor({c.rep_dim, c.rep_dim}, glorot_std(c.rep_dim, c.rep_dim), rng));
  store.create("mlp.fc1.bias", Tensor::zeros({c.rep_dim}));
  store.create("mlp.bn.gamma", Tensor::full({c.rep_dim}, 1.0));
  store.create("mlp.bn.beta", Tensor::zeros({c.rep_dim}));
  const std::int64_t classes = c.class_count;
  store.create("mlp.fc2.w",
               normal_tensor({c.rep_dim, classes}, glorot_std(c.rep_dim, classes), rng));
  store.create("mlp.fc2.bias", Tensor::zeros({classes}));
  store.create_buffer("mlp.bn.running_mean", Tensor::zeros({c.rep_dim}));
  store.create_buffer("mlp.bn.running_var", Tensor::full({c.rep_dim}, 1.0));
}

GraphInput Model::prepare(const AttributedGraph& graph) const {
  if (graph.node_features.dim(1) != config_.feature_dim) {
    std::ostringstream msg;
    msg << "feature width mismatch: graph has " << graph.node_features.dim(1)
        << " columns, model expects " << config_.feature_dim;
    throw DataError(msg.str());
  }
  GraphInput input;
  input.features = graph.node_features;
  if (config_.encoder == EncoderKind::Tgnn) {
    input.adj_pow = matrix_power(normalized_adjacency(graph), config_.adj_power);
    input.pi = build_pi_tensor(graph, config_.topology);
  } else {
    input.gin_agg = adjacency_plus_identity(graph);
  }
  return input;
}

std::vector<GraphInput> Model::prepare_dataset(const DomainDataset& dataset) const {
  std::vector<GraphInput> inputs;
  inputs.reserve(dataset.graphs.size());
  for (const AttributedGraph& g : dataset.graphs) inputs.push_back(prepare(g));
  return inputs;
}

Var Model::conv_branch(Tape& tape, const BoundParams& params, const GraphInput& input) const {
  const ModelConfig& c = config_;
  const std::int64_t n = input.features.dim(0);
  Var adj = tape.leaf(input.adj_pow);
  Var h = tape.leaf(input.features);
  std::vector<Var> layer_outputs;
  layer_outputs.reserve(c.gcn_layers);
  for (int i = 0; i < c.gcn_layers; ++i) {
    h = tape.relu(tape.matmul(tape.matmul(adj, h), params[gcn_name(i) + ".w"]));
    layer_outputs.push_back(h);
  }
  Var stacked = tape.permute(tape.stack_rows(layer_outputs), {1, 0, 2});
  stacked = tape.reshape(
      stacked, {n, static_cast<std::int64_t>(c.gcn_layers), c.reshape_base, c.reshape_base});
  Var mapped = ttl_forward(tape, params, "conv.ttl", conv_ttl_, stacked);
  Var pooled = tape.scale(tape.sum_axis(mapped, 0), 1.0 / static_cast<double>(n));
  const std::int64_t flat = c.gcn_layers * c.reshape_base * c.reshape_base;
  Var rep = tape.matmul(tape.reshape(pooled, {1, flat}), params["conv.out.w"]);
  return tape.add_bias(tape.reshape(rep, {c.rep_dim}), params["conv.out.bias"]);
}

Var Model::topo_branch(Tape& tape, const BoundParams& params, const GraphInput& input) const {
  const ModelConfig& c = config_;
  const std::int64_t k = c.topology.k();
  const std::int64_t p = c.topology.resolution;
  Var weight = params["topo.cnn.w"];
  Var bias = params["topo.cnn.bias"];
  std::vector<Var> per_dim;
  per_dim.reserve(c.topology.q);
  for (std::int64_t j = 0; j < c.topology.q; ++j) {
    Tensor slice({k, p, p});
    for (std::int64_t f = 0; f < k; ++f) {
      for (std::int64_t y = 0; y < p; ++y) {
        for (std::int64_t x = 0; x < p; ++x) {
          slice.at({f, y, x}) = input.pi.at({f, j, y, x});
        }
      }
    }
    Var img = tape.relu(tape.conv2d(tape.leaf(slice), weight, bias));
    per_dim.push_back(ttl_forward(tape, params, "topo.ttl", topo_ttl_, tape.maxpool2d(img)));
  }
  Var fused =
      per_dim.size() == 1 ? per_dim[0] : tape.max_axis0(tape.stack_rows(per_dim));
  const std::int64_t flat = shape_numel(c.topo_ttl_out);
  Var rep = tape.matmul(tape.reshape(fused, {1, flat}), params["topo.out.w"]);
  return tape.add_bias(tape.reshape(rep, {c.rep_dim}), params["topo.out.bias"]);
}

Var Model::gin_branch(Tape& tape, const BoundParams& params, const GraphInput& input) const {
  const ModelConfig& c = config_;
  Var agg = tape.leaf(input.gin_agg);
  Var h = tape.leaf(input.features);
  for (int i = 0; i < c.gin_layers; ++i) {
    const std::string p = gin_name(i);
    Var mixed = tape.add(tape.matmul(agg, h), tape.mul(h, params[p + ".eps"]));
    Var hidden = tape.relu(
        tape.add_bias(tape.matmul(mixed, params[p + ".m1.w"]), params[p + ".m1.bias"]));
    h = tape.relu(
        tape.add_bias(tape.matmul(hidden, params[p + ".m2.w"]), params[p + ".m2.bias"]));
  }
  Var readout = tape.reshape(tape.sum_axis(h, 0), {1, c.gin_hidden});
  Var rep = tape.matmul(readout, params["gin.out.w"]);
  return tape.add_bias(tape.reshape(rep, {c.rep_dim}), params["gin.out.bias"]);
}

Var Model::combine(Tape& tape, Var conv_rep, Var topo_rep) {
  return tape.scale(tape.add(conv_rep, topo_rep), 0.5);
}

Var Model::mlp(Tape& tape, const BoundParams& params, ParamStore& store, Var reps,
               const MlpMode& mode) const {
  const ModelConfig& c = config_;
  Var h = tape.add_bias(tape.matmul(reps, params["mlp.fc1.w"]), params["mlp.fc1.bias"]);
  if (mode.training) {
    Tape::BatchNormStats stats;
    h = tape.batchnorm_train(h, params["mlp.bn.gamma"], params["mlp.bn.beta"], &stats);
    if (mode.update_running_stats) {
      Tensor& mean = store.buffer("mlp.bn.running_mean");
      Tensor& var = store.buffer("mlp.bn.running_var");
      for (std::int64_t i = 0; i < mean.numel(); ++i) {
        mean[i] = 0.9 * mean[i] + 0.1 * stats.mean[i];
        var[i] = 0.9 * var[i] + 0.1 * stats.var[i];
      }
    }
  } else {
    h = tape.batchnorm_eval(h, params["mlp.bn.gamma"], params["mlp.bn.beta"],
                            store.buffer("mlp.bn.running_mean"),
                            store.buffer("mlp.bn.running_var"));
  }
  h = tape.relu(h);
  if (mode.training && c.dropout > 0.0) {
    if (mode.dropout_rng == nullptr) {
      throw TrainingError("training-mode dropout requires a random stream");
    }
    const double keep = 1.0 - c.dropout;
    Tensor mask(tape.value(h).shape());
    for (double& m : mask.vec()) {
      m = (mode.dropout_rng->uniform() < keep) ? 1.0 / keep : 0.0;
    }
    h = tape.mul(h, tape.leaf(mask));
  }
  return tape.add_bias(tape.matmul(h, params["mlp.fc2.w"]), params["mlp.fc2.bias"]);
}

}  // namespace lptgnn
