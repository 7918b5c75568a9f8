#include "lptgnn/topology.hpp"

#include <algorithm>

#include "lptgnn/errors.hpp"

namespace lptgnn {

void validate_topology(const TopologyConfig& config) {
  if (config.filtrations.empty()) throw ConfigError("topology needs at least one filtration");
  if (config.q != 1 && config.q != 2)
    throw ConfigError("topology q must be 1 (H0) or 2 (H0+H1), got " + std::to_string(config.q));
  if (config.resolution < 2)
    throw ConfigError("persistence-image resolution must be at least 2");
}

PIConfig pi_config_for(const std::vector<double>& filtration_values,
                       const TopologyConfig& config) {
  double lo = filtration_values[0], hi = filtration_values[0];
  for (double v : filtration_values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  PIConfig pc;
  pc.resolution = config.resolution;
  pc.weight = config.weight;
  pc.x_min = lo;
  pc.x_max = hi;
  pc.y_min = lo;
  pc.y_max = hi;
  double width = hi - lo;
  pc.bandwidth_x = width / static_cast<double>(config.resolution);
  pc.bandwidth_y = pc.bandwidth_x;
  return pc;
}

std::vector<PersistenceDiagram> diagrams_for(const AttributedGraph& graph,
                                             const std::vector<double>& filtration_values,
                                             int q) {
  std::vector<PersistenceDiagram> out;
  out.push_back(sublevel_persistence_h0(graph, filtration_values));
  if (q == 2) out.push_back(sublevel_persistence_h1(graph, filtration_values));
  return out;
}

Tensor build_pi_tensor(const AttributedGraph& graph, const TopologyConfig& config) {
  validate_topology(config);
  int k = config.k(), q = config.q, p = config.resolution;
  Tensor out(Shape{k, q, p, p});
  std::int64_t plane = static_cast<std::int64_t>(p) * p;
  for (int fi = 0; fi < k; ++fi) {
    std::vector<double> values = compute_filtration(graph, config.filtrations[static_cast<std::size_t>(fi)]);
    PIConfig pc = pi_config_for(values, config);
    std::vector<PersistenceDiagram> diagrams = diagrams_for(graph, values, q);
    for (int qi = 0; qi < q; ++qi) {
      Tensor image = persistence_image(diagrams[static_cast<std::size_t>(qi)], pc);
      std::copy(image.data(), image.data() + plane,
                out.data() + (static_cast<std::int64_t>(fi) * q + qi) * plane);
    }
  }
  return out;
}

}  // namespace lptgnn
