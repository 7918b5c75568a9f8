#include "lptgnn/losses.hpp"

#include "lptgnn/errors.hpp"

namespace lptgnn {

std::vector<NeighborSet> pseudo_label(const Tensor& target_logits,
                                      const std::vector<int>& source_labels) {
  if (target_logits.rank() != 2) {
    throw ShapeError("pseudo_label expects (batch, classes) logits, got " +
                     shape_str(target_logits.shape()));
  }
  const std::int64_t batch = target_logits.dim(0);
  const std::int64_t classes = target_logits.dim(1);
  const Tensor probs = softmax_rows(target_logits);
  std::vector<NeighborSet> sets;
  sets.reserve(batch);
  for (std::int64_t i = 0; i < batch; ++i) {
    NeighborSet set;
    set.target_index = i;
    double best = probs[i * classes];
    int best_class = 0;
    for (std::int64_t c = 1; c < classes; ++c) {
      const double p = probs[i * classes + c];
      if (p > best) {
        best = p;
        best_class = static_cast<int>(c);
      }
    }
    set.pseudo_label = best_class;
    set.confidence = best;
    for (std::int64_t j = 0; j < static_cast<std::int64_t>(source_labels.size()); ++j) {
      if (source_labels[j] == best_class) set.source_indices.push_back(j);
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

RegResult consistency_reg(Tape& tape, const std::vector<NeighborSet>& sets, Var source_reps,
                          const MlpForward& classify, double threshold,
                          std::int64_t target_batch_size) {
  if (threshold <= 0.0) throw ConfigError("confidence threshold must be positive");
  if (target_batch_size < 1) throw ConfigError("target batch size must be >= 1");
  std::vector<std::vector<std::int64_t>> groups;
  std::vector<int> labels;
  RegResult result;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const NeighborSet& set = sets[i];
    if (set.confidence > threshold && !set.source_indices.empty()) {
      groups.push_back(set.source_indices);
      labels.push_back(set.pseudo_label);
      result.picked.push_back(i);
    }
  }
  if (groups.empty()) {
    result.loss = tape.leaf(Tensor::scalar(0.0));
    return result;
  }
  Var means = tape.aggregate_rows(source_reps, groups);
  Var logits = classify(tape, means);
  result.loss = tape.scale(tape.softmax_ce_sum(logits, labels),
                           1.0 / static_cast<double>(target_batch_size));
  return result;
}

Var supervised_loss(Tape& tape, Var logits, const std::vector<int>& labels) {
  if (labels.empty()) throw ShapeError("supervised_loss needs at least one label");
  return tape.scale(tape.softmax_ce_sum(logits, labels),
                    1.0 / static_cast<double>(labels.size()));
}

Var total_loss(Tape& tape, const std::vector<Var>& terms) {
  if (terms.empty()) return tape.leaf(Tensor::scalar(0.0));
  Var total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = tape.add(total, terms[i]);
  return total;
}

}  // namespace lptgnn
