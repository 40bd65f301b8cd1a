#pragma once

#include <cstddef>
#include <istream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace mmicap {

/// Descending, strictly positive eigenvalues of an input covariance.
/// Index 0 holds the largest eigenvalue; functions that take an eigenvalue
/// index from users (rho_k, the CLI tables) count from 1.
class Spectrum {
 public:
  /// Validates positivity and finiteness, then sorts descending.
  explicit Spectrum(std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }

  /// Leading `n` eigenvalues.
  Spectrum top(std::size_t n) const;
  Spectrum scaled(double factor) const;

  bool operator==(const Spectrum&) const = default;

 private:
  std::vector<double> values_;
};

/// Symmetric positive-definite N0 x N0 matrix.
class CovarianceMatrix {
 public:
  /// Throws NotSymmetric or NotPositiveDefinite.
  explicit CovarianceMatrix(Eigen::MatrixXd entries);

  static CovarianceMatrix diagonal(const Spectrum& spectrum);

  const Eigen::MatrixXd& matrix() const noexcept { return entries_; }
  Eigen::Index dim() const noexcept { return entries_.rows(); }

 private:
  Eigen::MatrixXd entries_;
};

/// Block-diagonal covariance made of `repetitions` copies of `block`.
struct BlockCovariance {
  CovarianceMatrix block;
  int repetitions = 1;

  Eigen::Index block_dim() const { return block.dim(); }
  Eigen::Index full_dim() const { return block.dim() * repetitions; }
  CovarianceMatrix expand() const;
};

/// Eigenvalues with the matching orthonormal eigenvectors (columns, same order).
struct Eigensystem {
  Spectrum spectrum;
  Eigen::MatrixXd vectors;
};

Eigensystem eigvals_from_covariance(const CovarianceMatrix& cov);

/// Eigensystem of diag(spectrum): the eigenvectors are the standard basis.
Eigensystem diagonal_eigensystem(const Spectrum& spectrum);

struct ExpDecay {
  double rate = 0.1;
};
struct Harmonic {};
struct Explicit {
  std::vector<double> values;
};
using SpectrumModel = std::variant<ExpDecay, Harmonic, Explicit>;

/// exp_decay: lambda_i = exp(-rate (i-1)); harmonic: lambda_i = 1/i (i from 1).
/// Explicit lists are validated and sorted; their own length wins over `n`
/// when `n` is zero.
Spectrum model_spectrum(const SpectrumModel& model, std::size_t n);

// I/O ------------------------------------------------------------------------

/// Square numeric grid, one matrix row per line. Blank lines are skipped.
CovarianceMatrix read_covariance_csv(std::istream& in);
CovarianceMatrix read_covariance_csv_file(const std::string& path);

/// {"kind": "exp_decay"|"harmonic"|"explicit", "rate": x, "n": k, "values": [...]}
Spectrum spectrum_from_json(const nlohmann::json& doc);

}  // namespace mmicap
