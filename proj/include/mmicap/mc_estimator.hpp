#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "mmicap/oracle.hpp"
#include "mmicap/spectrum.hpp"

namespace mmicap {

/// Coordinatewise strictly monotone differentiable activation.
struct BijectiveMap {
  std::string name;
  std::function<double(double)> apply;
  std::function<double(double)> log_derivative;  // log |phi'(a)|

  static BijectiveMap tanh();
};

enum class ChannelKind { Linear, Relu, Bijective };

/// Z | X ~ N(mean(X), sigma2 I) for linear and relu channels. For the
/// bijective channel the noise is added to the pre-activation A = WX + b + eta
/// and Z = phi(A).
struct Channel {
  WeightMatrix weights;
  Eigen::VectorXd bias;
  double sigma2 = 1.0;
  ChannelKind kind = ChannelKind::Linear;
  std::optional<BijectiveMap> map;

  static Channel linear(WeightMatrix w, double sigma2);
  static Channel linear(WeightMatrix w, Eigen::VectorXd bias, double sigma2);
  static Channel relu(WeightMatrix w, Eigen::VectorXd bias, double sigma2);
  static Channel bijective(WeightMatrix w, Eigen::VectorXd bias, double sigma2, BijectiveMap map);

  Eigen::Index output_dim() const { return weights.rows(); }
  void validate(Eigen::Index input_dim) const;
};

struct ReluModel {
  WeightMatrix weights;
  Eigen::VectorXd bias;
  double sigma2 = 1.0;

  Channel relu_channel() const { return Channel::relu(weights, bias, sigma2); }
  Channel linear_channel() const { return Channel::linear(weights, bias, sigma2); }
};

struct MCConfig {
  std::size_t n_outer = 20000;
  std::size_t n_inner = 20000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct MCEstimate {
  double value = 0.0;
  double std_error = 0.0;
  MCConfig config;
};

/// N0 x n matrix of draws L * e with L the Cholesky factor of cov. Column j
/// depends only on (seed, stream, j).
Eigen::MatrixXd sample_gaussian_inputs(const CovarianceMatrix& cov, std::size_t n, std::uint64_t seed,
                                       std::uint64_t stream = 0);

/// Plug-in estimate of H(Z) from the exact Gaussian-mixture form of p(z):
/// inner input draws give the mixture centres, outer draws give the
/// evaluation points. Bijective channels add the mean log-Jacobian.
MCEstimate estimate_entropy(const Channel& channel, const CovarianceMatrix& cov, const MCConfig& mc);

/// H(Z) - H(Z|X). For linear and relu channels H(Z|X) = N1/2 log(2 pi e sigma2);
/// the bijective channel also subtracts the log-Jacobian expectation estimated
/// on an independent stream.
MCEstimate estimate_mi(const Channel& channel, const CovarianceMatrix& cov, const MCConfig& mc);

/// Union bound sum_i Phi(-b_i / sqrt((W Sigma W^T)_ii)) on the probability that
/// some pre-activation leaves the linear region of relu, clamped to [0, 1].
double delta_bound(const ReluModel& model, const CovarianceMatrix& cov);

/// -d log d - (1-d) log(1-d), nats.
double binary_entropy(double delta);

/// 4 d |log 2d| + 2 d |log M| + 2 h2(d), M = max(1, (2 pi sigma2)^(-N1/2)).
/// Throws DeltaOutOfRange unless 0 <= d < 1/e.
double g_bound(double delta, double sigma2, std::size_t n1);

struct ReluRow {
  double scale = 0.0;
  double delta_bound = 0.0;
  std::optional<double> g_bound;
  double mi_estimate = 0.0;
  double std_error = 0.0;
  double closed_form = 0.0;
  double gap = 0.0;
};

struct ReluReport {
  std::string theorem = "relu_mmi_equality";
  std::vector<ReluRow> rows;
  bool pass = false;

  nlohmann::json to_json() const;
};

/// Large-bias construction: W is the water-filling optimum, b = c * 1 for
/// every scale c. Passes when the gap shrinks across scales (up to 3 combined
/// standard errors) and the last |gap| is within g_bound + 3 std errors.
ReluReport verify_relu_theorem(double budget, const CovarianceMatrix& cov, double sigma2, std::size_t n1,
                               const std::vector<double>& bias_scales, const MCConfig& mc);

struct OrderingReport {
  MCEstimate relu_entropy;
  MCEstimate linear_entropy;
  /// relu minus linear, from paired per-sample terms.
  double difference = 0.0;
  double combined_std_error = 0.0;
  bool pass = false;

  nlohmann::json to_json() const;
};

/// Both entropies from the same input and noise draws.
OrderingReport verify_entropy_ordering(const ReluModel& model, const CovarianceMatrix& cov, const MCConfig& mc);

}  // namespace mmicap
