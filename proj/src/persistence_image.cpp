#include "lptgnn/persistence_image.hpp"

#include <cmath>

#include "lptgnn/errors.hpp"

namespace lptgnn {

PIWeightKind pi_weight_from_string(const std::string& s) {
  if (s == "linear") return PIWeightKind::Linear;
  if (s == "constant") return PIWeightKind::Constant;
  throw ConfigError("unknown persistence-image weight: " + s + " (expected linear|constant)");
}

std::string to_string(PIWeightKind kind) {
  return kind == PIWeightKind::Linear ? "linear" : "constant";
}

double gaussian_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

Tensor persistence_image(const PersistenceDiagram& diagram, const PIConfig& config) {
  int p = config.resolution;
  if (p < 1) throw ShapeError("persistence image needs resolution >= 1");
  if (config.bandwidth_x <= 0.0 || config.bandwidth_y <= 0.0)
    throw ShapeError("persistence image needs positive bandwidths");
  if (config.x_max <= config.x_min || config.y_max <= config.y_min)
    throw ShapeError("persistence image needs a non-degenerate window");

  Tensor image(Shape{p, p});
  double step_x = (config.x_max - config.x_min) / static_cast<double>(p);
  double step_y = (config.y_max - config.y_min) / static_cast<double>(p);

  for (const DiagramPoint& point : diagram.points) {
    double mu_x = point.birth;
    double mu_y = point.death - point.birth;
    double g = config.weight == PIWeightKind::Linear ? mu_y : 1.0;
    if (g == 0.0) continue;
    for (int i = 0; i < p; ++i) {
      double x_lo = config.x_min + step_x * static_cast<double>(i);
      double x_hi = x_lo + step_x;
      double mass_x = gaussian_cdf((x_hi - mu_x) / config.bandwidth_x) -
                      gaussian_cdf((x_lo - mu_x) / config.bandwidth_x);
      if (mass_x == 0.0) continue;
      for (int j = 0; j < p; ++j) {
        double y_lo = config.y_min + step_y * static_cast<double>(j);
        double y_hi = y_lo + step_y;
        double mass_y = gaussian_cdf((y_hi - mu_y) / config.bandwidth_y) -
                        gaussian_cdf((y_lo - mu_y) / config.bandwidth_y);
        image[static_cast<std::int64_t>(i) * p + j] += g * mass_x * mass_y;
      }
    }
  }
  return image;
}

}  // namespace lptgnn
