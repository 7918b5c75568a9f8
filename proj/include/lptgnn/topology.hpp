#pragma once

#include <vector>

#include "lptgnn/filtration.hpp"
#include "lptgnn/persistence.hpp"
#include "lptgnn/persistence_image.hpp"

namespace lptgnn {

struct TopologyConfig {
  std::vector<FiltrationKind> filtrations{kAllFiltrations.begin(), kAllFiltrations.end()};
  int q = 1;  // 1 → H0 only; 2 → H0 and H1 channels
  int resolution = 50;
  PIWeightKind weight = PIWeightKind::Linear;

  int k() const { return static_cast<int>(filtrations.size()); }
};

void validate_topology(const TopologyConfig& config);

// Square window [min f, max f]² for one filtration; a degenerate range
// around value v widens to [v-0.5, v+0.5]. Bandwidths are width/P per axis.
PIConfig pi_config_for(const std::vector<double>& filtration_values,
                       const TopologyConfig& config);

// The diagrams feeding the Q channels of one filtration: H0, then H1 when
// q = 2.
std::vector<PersistenceDiagram> diagrams_for(const AttributedGraph& graph,
                                             const std::vector<double>& filtration_values,
                                             int q);

// The K×Q×P×P input tensor of the topological branch; deterministic for a
// fixed graph and configuration, constant with respect to model parameters.
Tensor build_pi_tensor(const AttributedGraph& graph, const TopologyConfig& config);

}  // namespace lptgnn
