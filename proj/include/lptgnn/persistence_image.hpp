#pragma once

#include <string>

#include "lptgnn/persistence.hpp"
#include "lptgnn/tensor.hpp"

namespace lptgnn {

enum class PIWeightKind { Linear, Constant };

PIWeightKind pi_weight_from_string(const std::string& s);
std::string to_string(PIWeightKind kind);

struct PIConfig {
  int resolution = 50;                    // P
  double bandwidth_x = 0.0, bandwidth_y = 0.0;  // δ_x, δ_y > 0
  PIWeightKind weight = PIWeightKind::Linear;
  double x_min = 0.0, x_max = 1.0;
  double y_min = 0.0, y_max = 1.0;
};

// Rasterizes a diagram to a P×P grid. Each point (b, d) maps to
// μ = (b, d−b); a pixel's value is the integral over its rectangle of the
// weighted normalized Gaussian sum, computed exactly as a product of
// Gaussian CDF differences per axis. The weight is μ_y (`linear`, so
// diagonal points vanish) or 1 (`constant`). Pixel {i, j} covers the i-th x
// interval and j-th y interval, both ascending.
Tensor persistence_image(const PersistenceDiagram& diagram, const PIConfig& config);

// Standard normal CDF.
double gaussian_cdf(double z);

}  // namespace lptgnn
