#include <cstdlib>
#include <cstring>

#include "kernels_impl.hpp"

namespace midway::kernels {

const KernelSet& scalar() {
  static const KernelSet set{
      "scalar",
      detail::gaussian_sum_scalar,
      detail::dot_scalar,
      detail::weighted_dot_scalar,
      detail::logistic_scalar,
      detail::trapezoid_min_scalar,
  };
  return set;
}

const KernelSet* avx2() {
#if defined(MIDWAY_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  static const KernelSet set{
      "avx2",
      detail::gaussian_sum_avx2,
      detail::dot_avx2,
      detail::weighted_dot_avx2,
      detail::logistic_avx2,
      detail::trapezoid_min_avx2,
  };
  return supported ? &set : nullptr;
#else
  return nullptr;
#endif
}

const KernelSet& active() {
  static const KernelSet& chosen = [&]() -> const KernelSet& {
    const char* force = std::getenv("MIDWAY_FORCE_SCALAR");
    if (force != nullptr && std::strcmp(force, "0") != 0) return scalar();
    if (const KernelSet* wide = avx2()) return *wide;
    return scalar();
  }();
  return chosen;
}

}  // namespace midway::kernels
