#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "lptgnn/graph.hpp"
#include "lptgnn/rng.hpp"

namespace lptgnn {

// Ascending edge-density quartiles, ties broken by original index; block
// sizes differ by at most one (earlier blocks take the remainder).
std::array<DomainDataset, 4> split_by_edge_density(const DomainDataset& dataset);

struct SubpopulationCounts {
  std::int64_t source_neg = 0;
  std::int64_t source_pos = 0;
  std::int64_t target_neg = 0;
  std::int64_t target_pos = 0;
};

// Splits a binary dataset into a source with an exact 1:2 negative:positive
// ratio and a target built from an exact 2:1 core plus all leftover graphs.
// Among the exact-ratio allocations the split maximizes the smaller of the
// two core scales first and the total core size second, which keeps both
// domains usable instead of letting one collapse to a handful of graphs.
std::pair<DomainDataset, DomainDataset> split_subpopulation_shift(const DomainDataset& dataset,
                                                                  std::uint64_t seed,
                                                                  SubpopulationCounts* counts = nullptr);

// One training step's worth of dataset indices per domain.
struct DomainBatch {
  std::vector<std::int64_t> source;
  std::vector<std::int64_t> target;
};

/// One epoch of paired batches: both domains are shuffled with their own
// streams, the larger domain is consumed in batch_size chunks (a trailing
// chunk survives if it has >= 2 entries), and the smaller domain cycles.
std::vector<DomainBatch> epoch_batches(std::int64_t source_count, std::int64_t target_count,
                                       std::int64_t batch_size, SplitRng& source_rng,
                                       SplitRng& target_rng);

}  // namespace lptgnn
