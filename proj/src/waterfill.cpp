#include "mmicap/waterfill.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mmicap/error.hpp"

namespace mmicap {

namespace {

void check_sigma2(double sigma2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw Error(ErrorCode::InvalidArgument, "noise variance must be positive, got " + std::to_string(sigma2));
  }
}

void check_n_tilde(const Spectrum& spectrum, std::size_t n_tilde) {
  if (n_tilde < 1 || n_tilde > spectrum.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "n_tilde " + std::to_string(n_tilde) + " outside [1, " +
                                                std::to_string(spectrum.size()) + "]");
  }
}

}  // namespace

double rho_k(const Spectrum& spectrum, double sigma2, std::size_t k) {
  check_sigma2(sigma2);
  if (k < 1 || k > spectrum.size()) {
    throw Error(ErrorCode::IndexOutOfRange,
                "k = " + std::to_string(k) + " outside [1, " + std::to_string(spectrum.size()) + "]");
  }
  if (k == 1) return 0.0;
  const double inv_k = 1.0 / spectrum[k - 1];
  // Sum of (1/lambda_k - 1/lambda_i): each term is >= 0, so no cancellation.
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) acc += inv_k - 1.0 / spectrum[i];
  return sigma2 * acc;
}

Breakpoints breakpoints(const Spectrum& spectrum, double sigma2, std::size_t n_tilde) {
  check_sigma2(sigma2);
  check_n_tilde(spectrum, n_tilde);
  Breakpoints bp;
  bp.rho.reserve(n_tilde);
  for (std::size_t k = 1; k <= n_tilde; ++k) bp.rho.push_back(rho_k(spectrum, sigma2, k));
  return bp;
}

std::size_t regime(double budget, const Breakpoints& bp) {
  if (budget < 0.0 || std::isnan(budget)) {
    throw Error(ErrorCode::NegativeBudget, "budget F = " + std::to_string(budget));
  }
  const std::size_t n = bp.n_tilde();
  for (std::size_t k_excluded = 0; k_excluded < n; ++k_excluded) {
    if (budget >= bp.rho[n - k_excluded - 1]) return k_excluded;
  }
  return n - 1;
}

WaterfillSolution solve_waterfill(double budget, const Spectrum& spectrum, double sigma2,
                                  std::size_t n_tilde) {
  const Breakpoints bp = breakpoints(spectrum, sigma2, n_tilde);
  const std::size_t active = n_tilde - regime(budget, bp);

  double inv_trace = 0.0;
  for (std::size_t i = 0; i < active; ++i) inv_trace += 1.0 / spectrum[i];

  WaterfillSolution sol;
  sol.mu_star = (budget + sigma2 * inv_trace) / static_cast<double>(active);
  sol.allocations.assign(n_tilde, 0.0);
  if (budget > 0.0) {
    double tail = 0.0;
    for (std::size_t i = 1; i < active; ++i) {
      sol.allocations[i] = std::max(0.0, sol.mu_star - sigma2 / spectrum[i]);
      tail += sol.allocations[i];
    }
    // The leading component absorbs rounding so the budget is met exactly.
    sol.allocations[0] = std::max(0.0, budget - tail);
  }
  for (double a : sol.allocations) {
    sol.budget_used += a;
    if (a > 0.0) ++sol.active_count;
  }
  return sol;
}

}  // namespace mmicap
