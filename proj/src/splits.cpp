#include "lptgnn/splits.hpp"

#include <algorithm>
#include <numeric>

#include "lptgnn/errors.hpp"

namespace lptgnn {

std::array<DomainDataset, 4> split_by_edge_density(const DomainDataset& dataset) {
  std::int64_t n = dataset.size();
  if (n < 4) throw DataError("edge-density split needs at least 4 graphs, got " + std::to_string(n));
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> density(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    density[static_cast<std::size_t>(i)] = edge_density(dataset.graphs[static_cast<std::size_t>(i)]);
  std::stable_sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    return density[static_cast<std::size_t>(a)] < density[static_cast<std::size_t>(b)];
  });

  std::array<DomainDataset, 4> out;
  std::int64_t base = n / 4, extra = n % 4;
  std::int64_t cursor = 0;
  for (int q = 0; q < 4; ++q) {
    std::int64_t take = base + (q < extra ? 1 : 0);
    DomainDataset& block = out[static_cast<std::size_t>(q)];
    block.class_count = dataset.class_count;
    block.role = dataset.role;
    block.name = dataset.name + "_q" + std::to_string(q);
    block.graphs.reserve(static_cast<std::size_t>(take));
    for (std::int64_t i = 0; i < take; ++i)
      block.graphs.push_back(dataset.graphs[static_cast<std::size_t>(order[static_cast<std::size_t>(cursor++)])]);
  }
  return out;
}

std::pair<DomainDataset, DomainDataset> split_subpopulation_shift(const DomainDataset& dataset,
                                                                  std::uint64_t seed,
                                                                  SubpopulationCounts* counts) {
  if (dataset.class_count != 2)
    throw DataError("subpopulation split supports binary datasets only, got C=" +
                    std::to_string(dataset.class_count));
  std::vector<std::int64_t> neg, pos;
  for (std::int64_t i = 0; i < dataset.size(); ++i) {
    const AttributedGraph& g = dataset.graphs[static_cast<std::size_t>(i)];
    if (!g.has_label()) throw DataError("subpopulation split needs labels on every graph");
    (g.graph_label == 0 ? neg : pos).push_back(i);
  }
  std::int64_t nn = static_cast<std::int64_t>(neg.size());
  std::int64_t np = static_cast<std::int64_t>(pos.size());

  // Source core (a, 2a), target core (2e, e); a + 2e <= nn, 2a + e <= np.
  std::int64_t best_a = 0, best_e = 0;
  for (std::int64_t a = 0; a <= nn; ++a)
    for (std::int64_t e = 0; a + 2 * e <= nn && 2 * a + e <= np; ++e) {
      auto better = [](std::int64_t a1, std::int64_t e1, std::int64_t a2, std::int64_t e2) {
        std::int64_t m1 = std::min(a1, e1), m2 = std::min(a2, e2);
        if (m1 != m2) return m1 > m2;
        return a1 + e1 > a2 + e2;
      };
      if (better(a, e, best_a, best_e)) {
        best_a = a;
        best_e = e;
      }
    }
  if (best_a == 0 || best_e == 0)
    throw DataError("dataset too small for a subpopulation split (" + std::to_string(nn) +
                    " negative, " + std::to_string(np) + " positive)");

  SplitRng rng(seed, 10);
  rng.shuffle(neg);
  rng.shuffle(pos);

  DomainDataset source, target;
  source.class_count = target.class_count = 2;
  source.role = DomainRole::Source;
  target.role = DomainRole::Target;
  source.name = dataset.name + "_subpop_source";
  target.name = dataset.name + "_subpop_target";
  auto take = [&dataset](DomainDataset& out, const std::vector<std::int64_t>& idx,
                         std::int64_t from, std::int64_t count) {
    for (std::int64_t i = from; i < from + count; ++i)
      out.graphs.push_back(dataset.graphs[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]);
  };
  take(source, neg, 0, best_a);
  take(source, pos, 0, 2 * best_a);
  // Target: exact 2:1 core, then every leftover graph.
  take(target, neg, best_a, nn - best_a);
  take(target, pos, 2 * best_a, np - 2 * best_a);

  if (counts) {
    counts->source_neg = best_a;
    counts->source_pos = 2 * best_a;
    counts->target_neg = nn - best_a;
    counts->target_pos = np - 2 * best_a;
  }
  return {std::move(source), std::move(target)};
}

std::vector<DomainBatch> epoch_batches(std::int64_t source_count, std::int64_t target_count,
                                       std::int64_t batch_size, SplitRng& source_rng,
                                       SplitRng& target_rng) {
  if (source_count <= 0 || target_count <= 0)
    throw DataError("both domains must be non-empty to form batches");
  if (batch_size < 2) throw ConfigError("batch size must be at least 2");

  std::vector<std::int64_t> source_order(static_cast<std::size_t>(source_count));
  std::vector<std::int64_t> target_order(static_cast<std::size_t>(target_count));
  std::iota(source_order.begin(), source_order.end(), 0);
  std::iota(target_order.begin(), target_order.end(), 0);
  source_rng.shuffle(source_order);
  target_rng.shuffle(target_order);

  bool source_major = source_count >= target_count;
  const std::vector<std::int64_t>& major = source_major ? source_order : target_order;
  const std::vector<std::int64_t>& minor = source_major ? target_order : source_order;

  std::vector<DomainBatch> batches;
  std::int64_t minor_pos = 0;
  std::int64_t major_count = static_cast<std::int64_t>(major.size());
  for (std::int64_t start = 0; start < major_count; start += batch_size) {
    std::int64_t take = std::min(batch_size, major_count - start);
    if (take < 2) break;
    DomainBatch batch;
    std::vector<std::int64_t>& major_slot = source_major ? batch.source : batch.target;
    std::vector<std::int64_t>& minor_slot = source_major ? batch.target : batch.source;
    for (std::int64_t i = 0; i < take; ++i)
      major_slot.push_back(major[static_cast<std::size_t>(start + i)]);
    for (std::int64_t i = 0; i < batch_size; ++i) {
      minor_slot.push_back(minor[static_cast<std::size_t>(minor_pos)]);
      minor_pos = (minor_pos + 1) % static_cast<std::int64_t>(minor.size());
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace lptgnn
