#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lptgnn/tensor.hpp"

namespace lptgnn {

// Undirected attributed graph. Edges are stored once with u < v; node
// features are an N×F matrix with a collection-wide constant F.
struct AttributedGraph {
  std::int64_t node_count = 0;
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  Tensor node_features;
  int graph_label = -1;

  bool has_label() const { return graph_label >= 0; }
};

enum class DomainRole { Source, Target };

struct DomainDataset {
  std::vector<AttributedGraph> graphs;
  DomainRole role = DomainRole::Source;
  int class_count = 0;
  std::string name;

  std::int64_t size() const { return static_cast<std::int64_t>(graphs.size()); }
};

// Throws ShapeError when the graph violates its structural invariants.
void validate_graph(const AttributedGraph& g);

std::vector<std::vector<std::int64_t>> adjacency_list(const AttributedGraph& g);
std::vector<std::int64_t> node_degrees(const AttributedGraph& g);

// Â = D̃^(-1/2) Ã D̃^(-1/2) with Ã = A + I, as a dense N×N matrix.
Tensor normalized_adjacency(const AttributedGraph& g);
// A + I (the GIN aggregation operator including the self term).
Tensor adjacency_plus_identity(const AttributedGraph& g);
// m^power for a square matrix, power ≥ 1.
Tensor matrix_power(const Tensor& m, int power);

// |E| / (N(N-1)/2); 0 for single-node graphs.
double edge_density(const AttributedGraph& g);

// Zero-pads the narrower feature matrices so both datasets share one width.
void align_feature_widths(DomainDataset& a, DomainDataset& b);

// Per-class graph counts indexed by label.
std::vector<std::int64_t> class_counts(const DomainDataset& d);

}  // namespace lptgnn
