#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lptgnn/tape.hpp"

namespace lptgnn {

// Pseudo-labeling decision for one target graph in a batch: predicted class,
// softmax confidence, and the source-batch positions sharing that class.
struct NeighborSet {
  std::int64_t target_index = 0;
  int pseudo_label = 0;
  double confidence = 0.0;
  std::vector<std::int64_t> source_indices;
};

// Values-only: reads the (B_t, C) logits off the tape, so no gradient flows
// through the decisions. Argmax ties resolve to the lower class index.
std::vector<NeighborSet> pseudo_label(const Tensor& target_logits,
                                      const std::vector<int>& source_labels);

using MlpForward = std::function<Var(Tape&, Var)>;

struct RegResult {
  Var loss;
  std::vector<std::size_t> picked;  // positions into the input set list
};

// Keeps the sets with confidence strictly above the threshold and a nonempty
// neighbor list, averages each set's source representations, classifies the
// averages, and sums cross-entropy against the pseudo-labels divided by the
// full target batch size. Nothing selected gives a constant zero.
RegResult consistency_reg(Tape& tape, const std::vector<NeighborSet>& sets, Var source_reps,
                          const MlpForward& classify, double threshold,
                          std::int64_t target_batch_size);

// Mean cross-entropy over the batch.
Var supervised_loss(Tape& tape, Var logits, const std::vector<int>& labels);

// Sum of the given scalar terms; an empty list gives a constant zero.
Var total_loss(Tape& tape, const std::vector<Var>& terms);

}  // namespace lptgnn
