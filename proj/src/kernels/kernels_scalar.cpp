#include <cmath>

#include "kernels_impl.hpp"

namespace midway::kernels::detail {

void gaussian_sum_scalar(std::span<const double> centers,
                         std::span<const double> grid, double inv_bandwidth,
                         std::span<double> out) {
  for (std::size_t j = 0; j < grid.size(); ++j) {
    double acc = 0.0;
    for (double c : centers) {
      const double u = (grid[j] - c) * inv_bandwidth;
      acc += std::exp(-0.5 * u * u);
    }
    out[j] += acc;
  }
}

double dot_scalar(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double weighted_dot_scalar(std::span<const double> w, std::span<const double> a,
                           std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * a[i] * b[i];
  return acc;
}

void logistic_scalar(std::span<const double> eta, std::span<double> out) {
  for (std::size_t i = 0; i < eta.size(); ++i) {
    // Branch on sign so exp never overflows.
    if (eta[i] >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-eta[i]));
    } else {
      const double e = std::exp(eta[i]);
      out[i] = e / (1.0 + e);
    }
  }
}

double trapezoid_min_scalar(std::span<const double> a, std::span<const double> b,
                            double dx) {
  const std::size_t n = a.size();
  if (n < 2) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) acc += std::min(a[i], b[i]);
  acc += 0.5 * (std::min(a[0], b[0]) + std::min(a[n - 1], b[n - 1]));
  return acc * dx;
}

}  // namespace midway::kernels::detail
