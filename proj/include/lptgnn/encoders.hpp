#pragma once

#include <string>
#include <vector>

#include "lptgnn/graph.hpp"
#include "lptgnn/lowrank.hpp"
#include "lptgnn/optim.hpp"
#include "lptgnn/rng.hpp"
#include "lptgnn/tape.hpp"
#include "lptgnn/topology.hpp"

namespace lptgnn {

enum class EncoderKind { Tgnn, Gin };

EncoderKind encoder_from_string(const std::string& s);
std::string to_string(EncoderKind kind);

struct ModelConfig {
  EncoderKind encoder = EncoderKind::Tgnn;
  std::int64_t feature_dim = 1;  // F, fixed by the dataset pair
  int class_count = 2;           // C
  std::int64_t rep_dim = 32;     // d
  double dropout = 0.5;

  // Graph-convolutional branch: layer width is reshape_base², stacked
  // layer outputs reshape to N × L × D × D before the TTL.
  int gcn_layers = 3;
  std::int64_t reshape_base = 6;
  int adj_power = 1;
  WeightStructure ttl_structure = WeightStructure::Tucker;
  int ttl_hidden = 1;

  // Topological branch.
  TopologyConfig topology;
  std::int64_t conv_channels = 8;
  Shape topo_ttl_out{4, 5, 5};

  // GIN encoder.
  int gin_layers = 3;
  std::int64_t gin_hidden = 32;
};

void validate_model_config(const ModelConfig& config);

// The per-graph constants a forward pass consumes. Everything here is
// parameter-independent and computed once per dataset.
struct GraphInput {
  Tensor adj_pow;   // N×N, Â^τ (TGNN)
  Tensor features;  // N×F
  Tensor pi;        // K×Q×P×P (TGNN)
  Tensor gin_agg;   // N×N, A+I (GIN)
};

// Forward-pass modes for the classifier head.
struct MlpMode {
  bool training = false;
  bool update_running_stats = false;
  SplitRng* dropout_rng = nullptr;  // needed when training with dropout > 0
};

class Model {
public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const TTLSpec& conv_ttl() const { return conv_ttl_; }
  const TTLSpec& topo_ttl() const { return topo_ttl_; }

  // Creates every parameter of the selected encoder plus the MLP head.
  void init_params(ParamStore& store, SplitRng& rng) const;

  GraphInput prepare(const AttributedGraph& graph) const;
  std::vector<GraphInput> prepare_dataset(const DomainDataset& dataset) const;

  // Branch representations, each a length-d vector for one graph.
  Var conv_branch(Tape& tape, const BoundParams& params, const GraphInput& input) const;
  Var topo_branch(Tape& tape, const BoundParams& params, const GraphInput& input) const;
  Var gin_branch(Tape& tape, const BoundParams& params, const GraphInput& input) const;

  // Elementwise mean of two branch vectors (the combined representation).
  static Var combine(Tape& tape, Var conv_rep, Var topo_rep);

  // dense(d→d) → batch-norm → ReLU → dropout → dense(d→C) on (B, d) rows;
  // returns raw logits. Training mode uses batch statistics (optionally
  // folding them into the running buffers at momentum 0.9) and inverted
  // dropout; eval mode uses the running buffers and no dropout.
  Var mlp(Tape& tape, const BoundParams& params, ParamStore& store, Var reps,
          const MlpMode& mode) const;

private:
  ModelConfig config_;
  TTLSpec conv_ttl_;
  TTLSpec topo_ttl_;
};

}  // namespace lptgnn
