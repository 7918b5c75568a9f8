#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lptgnn/encoders.hpp"
#include "lptgnn/graph.hpp"
#include "lptgnn/optim.hpp"

namespace lptgnn {

struct TrainConfig {
  double learning_rate = 0.01;
  std::int64_t batch_size = 32;
  int max_epochs = 200;
  int patience = 20;
  double confidence_threshold = 0.8;
  std::uint64_t seed = 0;
  bool disable_conv = false;
  bool disable_topo = false;
  bool disable_sup = false;
  bool disable_lp = false;
};

void validate_train_config(const TrainConfig& train, const ModelConfig& model);

struct EpochMetrics {
  int epoch = 0;
  double loss_sup = 0.0;
  double loss_reg_conv = 0.0;
  double loss_reg_topo = 0.0;
  // Selected neighbor sets over all pseudo-labeling decisions this epoch.
  double filtered_fraction = 0.0;
  // Pseudo-label accuracy among the selected sets. Diagnostic only; target
  // labels feed nothing else on the training path.
  double pseudo_acc = 0.0;
  double target_acc = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  int epochs_run = 0;
  int best_epoch = 0;
  double best_accuracy = 0.0;
  // Accuracy of the parameters left in the store: the best snapshot when
  // patience stopped the run, otherwise the final epoch's.
  double final_accuracy = 0.0;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

class Trainer {
public:
  Trainer(Model model, TrainConfig config);

  // Initializes parameters into the empty store, then alternates source and
  // target batches for up to max_epochs, stopping early when target accuracy
  // fails to improve for `patience` consecutive epochs (and restoring the
  // best parameters in that case).
  TrainResult fit(ParamStore& store, const DomainDataset& source, const DomainDataset& target,
                  const EpochCallback& on_epoch = {});

  // Eval-mode accuracy on a labeled dataset.
  double evaluate(ParamStore& store, const DomainDataset& dataset) const;

  const Model& model() const { return model_; }
  const TrainConfig& config() const { return config_; }

private:
  double evaluate_cached(ParamStore& store, const std::vector<GraphInput>& inputs,
                         const std::vector<int>& labels) const;

  Model model_;
  TrainConfig config_;
};

}  // namespace lptgnn
