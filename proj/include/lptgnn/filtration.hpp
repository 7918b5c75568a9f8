#pragma once

#include <array>
#include <string>
#include <vector>

#include "lptgnn/graph.hpp"

namespace lptgnn {

enum class FiltrationKind { Degree, Betweenness, Eigenvector, Closeness };

// The benchmark order for K=4 tensors.
inline constexpr std::array<FiltrationKind, 4> kAllFiltrations = {
    FiltrationKind::Degree, FiltrationKind::Betweenness, FiltrationKind::Eigenvector,
    FiltrationKind::Closeness};

FiltrationKind filtration_from_string(const std::string& s);
std::string to_string(FiltrationKind kind);

// Per-node filtration values:
//   degree       node degree
//   betweenness  Brandes shortest-path betweenness, unnormalized
//   closeness    (N-1) / sum of distances within the node's component,
//                0 for isolated nodes
//   eigenvector  principal eigenvector of A + I via power iteration,
//                L2-normalized
std::vector<double> compute_filtration(const AttributedGraph& graph, FiltrationKind kind);

}  // namespace lptgnn
