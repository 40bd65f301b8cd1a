#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mmicap/spectrum.hpp"

namespace mmicap {

/// N1 x N0 weight matrix. The bias is not represented: it cancels in the
/// mutual information of a linear Gaussian channel.
class WeightMatrix {
 public:
  WeightMatrix() = default;
  explicit WeightMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {}

  const Eigen::MatrixXd& matrix() const noexcept { return entries_; }
  Eigen::Index rows() const noexcept { return entries_.rows(); }
  Eigen::Index cols() const noexcept { return entries_.cols(); }
  /// Tr(W^T W).
  double frobenius_sq() const { return entries_.squaredNorm(); }

 private:
  Eigen::MatrixXd entries_;
};

struct OptimizerConfig {
  int max_iters = 5000;
  double step_size = 0.1;
  double tolerance = 1e-8;
  std::uint64_t seed = 0;
  int restarts = 5;

  void validate() const;
};

struct OptimizeResult {
  WeightMatrix weights;
  double achieved_nats = 0.0;
  /// False when the projected gradient norm stayed above tolerance (DidNotConverge).
  bool converged = false;
  double gradient_norm = 0.0;
  int iterations = 0;
};

/// 1/2 log det(I + W Sigma W^T / sigma2), via Cholesky.
double exact_linear_mi(const WeightMatrix& w, const CovarianceMatrix& cov, double sigma2);
double exact_linear_mi(const Eigen::MatrixXd& w, const Eigen::MatrixXd& cov, double sigma2);

/// d/dW of exact_linear_mi: (1/sigma2) (I + W Sigma W^T / sigma2)^{-1} W Sigma.
Eigen::MatrixXd linear_mi_gradient(const Eigen::MatrixXd& w, const Eigen::MatrixXd& cov, double sigma2);

/// Rows i < N-tilde are sqrt(allocation_i) * u_i^T for the top eigenvectors u_i;
/// the remaining rows are zero.
WeightMatrix build_optimal_weights(double budget, const Eigensystem& eig, double sigma2, std::size_t n1);

/// Projected gradient ascent over {Tr(W^T W) <= F}; best over restarts.
OptimizeResult maximize_mi(double budget, const CovarianceMatrix& cov, double sigma2, std::size_t n1,
                           const OptimizerConfig& config);

/// Same, over a single nf x nb filter tied across every block of the input.
/// The returned weights are the filter; achieved_nats is evaluated on the full
/// block-diagonal channel.
OptimizeResult maximize_mi_conv(double budget, const BlockCovariance& block, std::size_t nf, double sigma2,
                                const OptimizerConfig& config);

/// Block-diagonal expansion of a tied filter.
Eigen::MatrixXd tie_filter(const Eigen::MatrixXd& filter, int repetitions);

/// Layer matrices W_1..W_K whose product W_K ... W_1 equals `w`; widths[k] is
/// the output width of layer k+1 and widths.back() must equal w.rows().
std::vector<Eigen::MatrixXd> factor_weights(const WeightMatrix& w, const std::vector<std::size_t>& widths);

/// exact_linear_mi of the product of factor_weights(w, widths).
double factor_check_multilayer(const WeightMatrix& w, const std::vector<std::size_t>& widths,
                               const CovarianceMatrix& cov, double sigma2);

}  // namespace mmicap
