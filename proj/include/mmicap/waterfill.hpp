#pragma once

#include <cstddef>
#include <vector>

#include "mmicap/spectrum.hpp"

namespace mmicap {

/// Regime boundaries rho_1..rho_N of the eigenvalue allocation problem.
/// rho[k-1] is the budget at which the k-th principal component switches on.
struct Breakpoints {
  std::vector<double> rho;

  std::size_t n_tilde() const noexcept { return rho.size(); }
  /// 1-based access.
  double at(std::size_t k) const { return rho.at(k - 1); }
};

struct WaterfillSolution {
  double mu_star = 0.0;
  std::vector<double> allocations;  // lambda-tilde_i, descending eigenvalue order
  std::size_t active_count = 0;
  double budget_used = 0.0;
};

/// rho_k = sigma2 (k / lambda_k - sum_{i<=k} 1/lambda_i), k in [1, spectrum.size()].
double rho_k(const Spectrum& spectrum, double sigma2, std::size_t k);

Breakpoints breakpoints(const Spectrum& spectrum, double sigma2, std::size_t n_tilde);

/// Number of excluded trailing components K: the smallest K >= 0 with
/// F >= rho_{N-K}. Ties go to the regime with more active components.
std::size_t regime(double budget, const Breakpoints& bp);

/// Maximizes sum_i log(lambda-tilde_i + sigma2/lambda_i) subject to
/// lambda-tilde >= 0, sum lambda-tilde = F over the top n_tilde components.
WaterfillSolution solve_waterfill(double budget, const Spectrum& spectrum, double sigma2,
                                  std::size_t n_tilde);

}  // namespace mmicap
