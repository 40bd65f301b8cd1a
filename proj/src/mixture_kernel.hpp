#pragma once

#include <cstddef>

namespace mmicap::detail {

/// log sum_i exp(-|z - c_i|^2 * inv_two_s2) over `n` centres stored
/// dimension-major (centres[k * n + i] is coordinate k of centre i).
/// `scratch` must hold n doubles.
double log_gaussian_mixture_sum(const double* centres, std::size_t n, std::size_t dim, const double* z,
                                double inv_two_s2, double* scratch);

}  // namespace mmicap::detail
