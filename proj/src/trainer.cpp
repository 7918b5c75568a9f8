#include "lptgnn/trainer.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "lptgnn/errors.hpp"
#include "lptgnn/losses.hpp"
#include "lptgnn/splits.hpp"

namespace lptgnn {

namespace {

struct StepStats {
  double sup = 0.0;
  double reg_conv = 0.0;
  double reg_topo = 0.0;
  std::int64_t selected = 0;
  std::int64_t considered = 0;
  std::int64_t pseudo_correct = 0;
};

std::vector<int> dataset_labels(const DomainDataset& dataset, const char* role) {
  std::vector<int> labels;
  labels.reserve(dataset.graphs.size());
  for (std::size_t i = 0; i < dataset.graphs.size(); ++i) {
    const AttributedGraph& g = dataset.graphs[i];
    if (!g.has_label()) {
      std::ostringstream msg;
      msg << role << " graph " << i << " has no label";
      throw DataError(msg.str());
    }
    labels.push_back(g.graph_label);
  }
  return labels;
}

int argmax_row(const Tensor& logits, std::int64_t row) {
  const std::int64_t classes = logits.dim(1);
  int best = 0;
  for (std::int64_t c = 1; c < classes; ++c) {
    if (logits[row * classes + c] > logits[row * classes + best]) best = static_cast<int>(c);
  }
  return best;
}

}  // namespace

void validate_train_config(const TrainConfig& train, const ModelConfig& model) {
  if (train.learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (train.batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (train.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (train.patience < 1) throw ConfigError("patience must be >= 1");
  if (train.confidence_threshold <= 0.0) {
    throw ConfigError("confidence_threshold must be positive");
  }
  if (model.encoder == EncoderKind::Tgnn) {
    if (train.disable_conv && train.disable_topo) {
      throw ConfigError("cannot disable both encoder branches");
    }
  } else if (train.disable_conv || train.disable_topo) {
    throw ConfigError("branch ablations apply to the tgnn encoder only");
  }
}

Trainer::Trainer(Model model, TrainConfig config)
    : model_(std::move(model)), config_(config) {
  validate_train_config(config_, model_.config());
}

TrainResult Trainer::fit(ParamStore& store, const DomainDataset& source,
                         const DomainDataset& target, const EpochCallback& on_epoch) {
  if (store.size() != 0) throw TrainingError("fit expects an empty parameter store");
  if (source.graphs.empty() || target.graphs.empty()) {
    throw DataError("both domains need at least one graph");
  }
  const std::vector<int> source_labels = dataset_labels(source, "source");
  const std::vector<int> target_labels = dataset_labels(target, "target");
  const int classes = model_.config().class_count;
  for (int label : source_labels) {
    if (label >= classes) throw DataError("source label exceeds the configured class count");
  }
  for (int label : target_labels) {
    if (label >= classes) throw DataError("target label exceeds the configured class count");
  }

  SplitRng init_rng(config_.seed, 1);
  model_.init_params(store, init_rng);
  SplitRng dropout_rng(config_.seed, 2);
  SplitRng source_rng(config_.seed, 3);
  SplitRng target_rng(config_.seed, 4);

  const std::vector<GraphInput> source_inputs = model_.prepare_dataset(source);
  const std::vector<GraphInput> target_inputs = model_.prepare_dataset(target);

  const bool gin = model_.config().encoder == EncoderKind::Gin;
  const bool use_conv = gin || !config_.disable_conv;
  const bool use_topo = !gin && !config_.disable_topo;

  auto branch_rep = [&](Tape& tape, const BoundParams& params, const GraphInput& input,
                        bool conv) {
    if (gin) return model_.gin_branch(tape, params, input);
    return conv ? model_.conv_branch(tape, params, input)
                : model_.topo_branch(tape, params, input);
  };

  auto run_step = [&](const DomainBatch& batch, int epoch, int step) {
    Tape tape;
    BoundParams params(tape, store);
    MlpMode train_mode;
    train_mode.training = true;
    train_mode.update_running_stats = true;
    train_mode.dropout_rng = &dropout_rng;
    auto classify = [&](Tape& t, Var reps) {
      return model_.mlp(t, params, store, reps, train_mode);
    };

    std::vector<int> batch_labels;
    batch_labels.reserve(batch.source.size());
    for (std::int64_t idx : batch.source) batch_labels.push_back(source_labels[idx]);

    auto batch_reps = [&](const std::vector<std::int64_t>& idxs,
                          const std::vector<GraphInput>& pool, bool conv) {
      std::vector<Var> rows;
      rows.reserve(idxs.size());
      for (std::int64_t idx : idxs) rows.push_back(branch_rep(tape, params, pool[idx], conv));
      return tape.stack_rows(rows);
    };

    StepStats stats;
    std::vector<NeighborSet> conv_sets;
    std::vector<NeighborSet> topo_sets;
    if (!config_.disable_lp) {
      if (use_conv) {
        Var logits = classify(tape, batch_reps(batch.target, target_inputs, true));
        conv_sets = pseudo_label(tape.value(logits), batch_labels);
      }
      if (use_topo) {
        Var logits = classify(tape, batch_reps(batch.target, target_inputs, false));
        topo_sets = pseudo_label(tape.value(logits), batch_labels);
      }
    }

    Var source_conv;
    Var source_topo;
    if (use_conv) source_conv = batch_reps(batch.source, source_inputs, true);
    if (use_topo) source_topo = batch_reps(batch.source, source_inputs, false);

    std::vector<Var> terms;
    if (!config_.disable_sup) {
      Var combined = (use_conv && use_topo) ? Model::combine(tape, source_conv, source_topo)
                                            : (use_conv ? source_conv : source_topo);
      Var sup = supervised_loss(tape, classify(tape, combined), batch_labels);
      stats.sup = tape.value(sup)[0];
      terms.push_back(sup);
    }

    if (!config_.disable_lp) {
      auto add_reg = [&](const std::vector<NeighborSet>& sets, Var reps, double& slot) {
        RegResult reg = consistency_reg(tape, sets, reps, classify,
                                        config_.confidence_threshold,
                                        static_cast<std::int64_t>(batch.target.size()));
        slot = tape.value(reg.loss)[0];
        stats.selected += static_cast<std::int64_t>(reg.picked.size());
        stats.considered += static_cast<std::int64_t>(sets.size());
        for (std::size_t pos : reg.picked) {
          const NeighborSet& set = sets[pos];
          if (set.pseudo_label == target_labels[batch.target[set.target_index]]) {
            ++stats.pseudo_correct;
          }
        }
        terms.push_back(reg.loss);
      };
      if (use_conv) add_reg(conv_sets, source_conv, stats.reg_conv);
      if (use_topo) add_reg(topo_sets, source_topo, stats.reg_topo);
    }

    Var loss = total_loss(tape, terms);
    const double loss_value = tape.value(loss)[0];
    if (!std::isfinite(loss_value)) {
      std::ostringstream msg;
      msg << "non-finite loss (" << loss_value << ") at epoch " << epoch << " step " << step;
      throw TrainingError(msg.str());
    }
    tape.backward(loss);
    params.harvest();
    store.adam_step(config_.learning_rate);
    return stats;
  };

  TrainResult result;
  ParamStore best;
  double best_acc = -1.0;
  int best_epoch = 0;
  int since_best = 0;
  const std::int64_t n_source = static_cast<std::int64_t>(source.graphs.size());
  const std::int64_t n_target = static_cast<std::int64_t>(target.graphs.size());

  for (int epoch = 1; epoch <= config_.max_epochs; ++epoch) {
    const std::vector<DomainBatch> batches =
        epoch_batches(n_source, n_target, config_.batch_size, source_rng, target_rng);
    StepStats epoch_stats;
    int step = 0;
    for (const DomainBatch& batch : batches) {
      ++step;
      const StepStats s = run_step(batch, epoch, step);
      epoch_stats.sup += s.sup;
      epoch_stats.reg_conv += s.reg_conv;
      epoch_stats.reg_topo += s.reg_topo;
      epoch_stats.selected += s.selected;
      epoch_stats.considered += s.considered;
      epoch_stats.pseudo_correct += s.pseudo_correct;
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    const double steps = static_cast<double>(batches.size());
    metrics.loss_sup = epoch_stats.sup / steps;
    metrics.loss_reg_conv = epoch_stats.reg_conv / steps;
    metrics.loss_reg_topo = epoch_stats.reg_topo / steps;
    metrics.filtered_fraction =
        epoch_stats.considered > 0
            ? static_cast<double>(epoch_stats.selected) / static_cast<double>(epoch_stats.considered)
            : 0.0;
    metrics.pseudo_acc =
        epoch_stats.selected > 0
            ? static_cast<double>(epoch_stats.pseudo_correct) / static_cast<double>(epoch_stats.selected)
            : 0.0;
    metrics.target_acc = evaluate_cached(store, target_inputs, target_labels);
    result.history.push_back(metrics);
    if (on_epoch) on_epoch(metrics);

    if (metrics.target_acc > best_acc) {
      best_acc = metrics.target_acc;
      best_epoch = epoch;
      best = store;
      since_best = 0;
    } else if (++since_best >= config_.patience) {
      store = best;
      result.stopped_early = true;
      break;
    }
  }

  result.epochs_run = static_cast<int>(result.history.size());
  result.best_epoch = best_epoch;
  result.best_accuracy = best_acc;
  result.final_accuracy =
      result.stopped_early ? best_acc : result.history.back().target_acc;
  return result;
}

double Trainer::evaluate(ParamStore& store, const DomainDataset& dataset) const {
  const std::vector<int> labels = dataset_labels(dataset, "eval");
  for (int label : labels) {
    if (label >= model_.config().class_count) {
      throw DataError("eval label exceeds the configured class count");
    }
  }
  return evaluate_cached(store, model_.prepare_dataset(dataset), labels);
}

double Trainer::evaluate_cached(ParamStore& store, const std::vector<GraphInput>& inputs,
                                const std::vector<int>& labels) const {
  if (inputs.empty()) throw DataError("evaluation needs at least one graph");
  const bool gin = model_.config().encoder == EncoderKind::Gin;
  const bool use_conv = gin || !config_.disable_conv;
  const bool use_topo = !gin && !config_.disable_topo;

  Tape tape;
  BoundParams params(tape, store);
  std::vector<Var> rows;
  rows.reserve(inputs.size());
  for (const GraphInput& input : inputs) {
    Var rep;
    if (gin) {
      rep = model_.gin_branch(tape, params, input);
    } else if (use_conv && use_topo) {
      rep = Model::combine(tape, model_.conv_branch(tape, params, input),
                           model_.topo_branch(tape, params, input));
    } else if (use_conv) {
      rep = model_.conv_branch(tape, params, input);
    } else {
      rep = model_.topo_branch(tape, params, input);
    }
    rows.push_back(rep);
  }
  MlpMode eval_mode;
  Var logits = model_.mlp(tape, params, store, tape.stack_rows(rows), eval_mode);
  const Tensor& values = tape.value(logits);
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (argmax_row(values, static_cast<std::int64_t>(i)) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace lptgnn
