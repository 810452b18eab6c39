// Compiled with -mavx2 -mfma; only reached through kernels::avx2() after a
// runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "kernels_impl.hpp"

namespace midway::kernels::detail {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

// exp(x) to within a couple of ulp for x in [-708, 709]; flushes to zero
// below -708 and saturates at +709. Range reduction x = n ln2 + r with
// |r| <= ln2/2, then a degree-13 Taylor polynomial for e^r.
inline __m256d exp_pd(__m256d x) {
  const __m256d lo_bound = _mm256_set1_pd(-708.0);
  const __m256d hi_bound = _mm256_set1_pd(709.0);
  const __m256d underflow = _mm256_cmp_pd(x, lo_bound, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lo_bound), hi_bound);

  const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
  const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);

  constexpr double kCoeff[] = {
      1.0 / 6227020800.0,  // 1/13!
      1.0 / 479001600.0,   // 1/12!
      1.0 / 39916800.0,
      1.0 / 3628800.0,
      1.0 / 362880.0,
      1.0 / 40320.0,
      1.0 / 5040.0,
      1.0 / 720.0,
      1.0 / 120.0,
      1.0 / 24.0,
      1.0 / 6.0,
      1.0 / 2.0,
      1.0,
      1.0,
  };
  __m256d p = _mm256_set1_pd(kCoeff[0]);
  for (int k = 1; k < 14; ++k) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kCoeff[k]));

  // 2^n assembled in the exponent field.
  const __m128i n32 = _mm256_cvtpd_epi32(n);
  __m256i n64 = _mm256_cvtepi32_epi64(n32);
  n64 = _mm256_add_epi64(n64, _mm256_set1_epi64x(1023));
  n64 = _mm256_slli_epi64(n64, 52);
  const __m256d scale = _mm256_castsi256_pd(n64);

  const __m256d result = _mm256_mul_pd(p, scale);
  return _mm256_andnot_pd(underflow, result);
}

}  // namespace

void gaussian_sum_avx2(std::span<const double> centers,
                       std::span<const double> grid, double inv_bandwidth,
                       std::span<double> out) {
  const std::size_t m = grid.size();
  const __m256d ih = _mm256_set1_pd(inv_bandwidth);
  const __m256d neg_half = _mm256_set1_pd(-0.5);
  std::size_t j = 0;
  for (; j + 4 <= m; j += 4) {
    const __m256d g = _mm256_loadu_pd(grid.data() + j);
    __m256d acc = _mm256_setzero_pd();
    for (double c : centers) {
      const __m256d u = _mm256_mul_pd(_mm256_sub_pd(g, _mm256_set1_pd(c)), ih);
      acc = _mm256_add_pd(acc, exp_pd(_mm256_mul_pd(neg_half, _mm256_mul_pd(u, u))));
    }
    _mm256_storeu_pd(out.data() + j, _mm256_add_pd(_mm256_loadu_pd(out.data() + j), acc));
  }
  if (j < m) {
    gaussian_sum_scalar(centers, grid.subspan(j), inv_bandwidth, out.subspan(j));
  }
}

double dot_avx2(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i + 4),
                           _mm256_loadu_pd(b.data() + i + 4), acc1);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double weighted_dot_avx2(std::span<const double> w, std::span<const double> a,
                         std::span<const double> b) {
  const std::size_t n = w.size();
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d wa0 = _mm256_mul_pd(_mm256_loadu_pd(w.data() + i), _mm256_loadu_pd(a.data() + i));
    const __m256d wa1 =
        _mm256_mul_pd(_mm256_loadu_pd(w.data() + i + 4), _mm256_loadu_pd(a.data() + i + 4));
    acc0 = _mm256_fmadd_pd(wa0, _mm256_loadu_pd(b.data() + i), acc0);
    acc1 = _mm256_fmadd_pd(wa1, _mm256_loadu_pd(b.data() + i + 4), acc1);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += w[i] * a[i] * b[i];
  return acc;
}

void logistic_avx2(std::span<const double> eta, std::span<double> out) {
  const std::size_t n = eta.size();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(eta.data() + i);
    // e = exp(-|x|); p = 1/(1+e) for x >= 0, e/(1+e) otherwise.
    const __m256d e = exp_pd(_mm256_or_pd(x, sign_mask));
    const __m256d denom = _mm256_add_pd(one, e);
    const __m256d pos = _mm256_div_pd(one, denom);
    const __m256d neg = _mm256_div_pd(e, denom);
    const __m256d is_neg = _mm256_cmp_pd(x, _mm256_setzero_pd(), _CMP_LT_OQ);
    _mm256_storeu_pd(out.data() + i, _mm256_blendv_pd(pos, neg, is_neg));
  }
  if (i < n) logistic_scalar(eta.subspan(i), out.subspan(i));
}

double trapezoid_min_avx2(std::span<const double> a, std::span<const double> b,
                          double dx) {
  const std::size_t n = a.size();
  if (n < 2) return 0.0;
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 1;
  for (; i + 4 <= n - 1; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_min_pd(_mm256_loadu_pd(a.data() + i),
                                           _mm256_loadu_pd(b.data() + i)));
  }
  double total = hsum(acc);
  for (; i + 1 < n; ++i) total += std::min(a[i], b[i]);
  total += 0.5 * (std::min(a[0], b[0]) + std::min(a[n - 1], b[n - 1]));
  return total * dx;
}

}  // namespace midway::kernels::detail
