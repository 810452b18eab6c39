#pragma once

// Data-parallel inner loops shared by the estimators and the positivity
// diagnostics. Each kernel has a scalar reference implementation and, where
// the build and the CPU allow, an AVX2+FMA variant. `active()` picks the
// widest variant the running CPU supports; the environment variable
// MIDWAY_FORCE_SCALAR=1 pins the scalar set.

#include <cstddef>
#include <span>

namespace midway::kernels {

struct KernelSet {
  const char* name;

  // out[j] += sum_i exp(-0.5 * ((grid[j] - centers[i]) * inv_bandwidth)^2)
  void (*gaussian_sum)(std::span<const double> centers,
                       std::span<const double> grid, double inv_bandwidth,
                       std::span<double> out);

  // sum_i a[i] * b[i]
  double (*dot)(std::span<const double> a, std::span<const double> b);

  // sum_i w[i] * a[i] * b[i]
  double (*weighted_dot)(std::span<const double> w, std::span<const double> a,
                         std::span<const double> b);

  // out[i] = 1 / (1 + exp(-eta[i]))
  void (*logistic)(std::span<const double> eta, std::span<double> out);

  // Trapezoid integral of min(a, b) on a uniform grid of spacing dx.
  double (*trapezoid_min)(std::span<const double> a, std::span<const double> b,
                          double dx);
};

const KernelSet& scalar();

// nullptr when the AVX2 variants were not compiled in or the CPU lacks
// AVX2/FMA.
const KernelSet* avx2();

const KernelSet& active();

}  // namespace midway::kernels
