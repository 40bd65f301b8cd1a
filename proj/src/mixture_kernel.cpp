#include "mixture_kernel.hpp"

#include <algorithm>
#include <cmath>

// Built with relaxed floating-point flags so the exp loop vectorizes.
// Nothing here may depend on infinities or NaNs.

namespace mmicap::detail {

double log_gaussian_mixture_sum(const double* centres, std::size_t n, std::size_t dim, const double* z,
                                double inv_two_s2, double* scratch) {
  for (std::size_t i = 0; i < n; ++i) scratch[i] = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double* c = centres + k * n;
    const double zk = z[k];
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) {
      const double d = zk - c[i];
      scratch[i] -= d * d * inv_two_s2;
    }
  }
  double top = scratch[0];
#pragma omp simd reduction(max : top)
  for (std::size_t i = 0; i < n; ++i) top = std::max(top, scratch[i]);
  double acc = 0.0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < n; ++i) acc += std::exp(scratch[i] - top);
  return top + std::log(acc);
}

}  // namespace mmicap::detail
