#pragma once

#include <span>

#include "midway/kernels.hpp"

namespace midway::kernels::detail {

void gaussian_sum_scalar(std::span<const double> centers,
                         std::span<const double> grid, double inv_bandwidth,
                         std::span<double> out);
double dot_scalar(std::span<const double> a, std::span<const double> b);
double weighted_dot_scalar(std::span<const double> w, std::span<const double> a,
                           std::span<const double> b);
void logistic_scalar(std::span<const double> eta, std::span<double> out);
double trapezoid_min_scalar(std::span<const double> a, std::span<const double> b,
                            double dx);

#ifdef MIDWAY_HAVE_AVX2
void gaussian_sum_avx2(std::span<const double> centers,
                       std::span<const double> grid, double inv_bandwidth,
                       std::span<double> out);
double dot_avx2(std::span<const double> a, std::span<const double> b);
double weighted_dot_avx2(std::span<const double> w, std::span<const double> a,
                         std::span<const double> b);
void logistic_avx2(std::span<const double> eta, std::span<double> out);
double trapezoid_min_avx2(std::span<const double> a, std::span<const double> b,
                          double dx);
#endif

}  // namespace midway::kernels::detail
