#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace fsmdp {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p);

/// Equiprobable discretization of N(0, sigma^2) into `cells` points, each
/// the conditional mean of its probability-1/cells cell. Linear functions
/// keep their exact expectation under this rule.
std::vector<double> normal_cell_means(int cells, double sigma);

inline double sup_norm_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double sup_norm(const std::vector<double>& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace fsmdp
