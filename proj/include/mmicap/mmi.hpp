#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mmicap/spectrum.hpp"
#include "mmicap/waterfill.hpp"

namespace mmicap {

enum class Activation { Linear, Relu, Bijective };

std::string to_string(Activation a);

struct FullyConnected {
  std::size_t n0 = 1;
  std::size_t n1 = 1;
};

/// Non-overlapping stride convolution: input n0 split into n0/nb blocks,
/// nf filters of width nb.
struct Conv {
  std::size_t n0 = 1;
  std::size_t nb = 1;
  std::size_t nf = 1;
};

/// Layer widths after the input; noise sits on the last layer.
struct MultiLayer {
  std::size_t n0 = 1;
  std::vector<std::size_t> widths;
};

using Family = std::variant<FullyConnected, Conv, MultiLayer>;

struct ArchitectureSpec {
  Family family;
  Activation activation = Activation::Linear;

  /// Throws InvalidArgument / DimensionMismatch on zero dimensions or nb not dividing n0.
  void validate() const;
  std::size_t n_tilde() const;
  /// Length of the spectrum this architecture consumes: n0, or nb for Conv.
  std::size_t spectrum_dim() const;
};

struct ChannelParams {
  double sigma2 = 1.0;
  double budget = 0.0;  // F, bound on Tr(W^T W)

  void validate() const;
};

struct MmiResult {
  double nats = 0.0;
  std::size_t regime_K = 0;
  std::size_t active_components = 0;
  std::size_t n_tilde = 0;
  Breakpoints breakpoints;
  Activation activation = Activation::Linear;
};

/// Closed form with a fixed number of active components:
/// m/2 log((F + sigma2 sum_{i<=m} 1/lambda_i) / (sigma2 m)) + 1/2 sum_{i<=m} log lambda_i.
/// Exposed separately so neighbouring regimes can be compared at their shared boundary.
double mmi_regime_formula(const Spectrum& spectrum, double sigma2, double budget, std::size_t active);

MmiResult mmi_fc(const ChannelParams& params, const Spectrum& spectrum, std::size_t n0, std::size_t n1);

/// repetitions x mmi_fc(block spectrum, nb, nf). The filter budget is shared, not split.
MmiResult mmi_conv(const ChannelParams& params, const BlockCovariance& block, std::size_t nf);
MmiResult mmi_conv(const ChannelParams& params, const Spectrum& block_spectrum, std::size_t repetitions,
                   std::size_t nf);

/// Budget applies to the end-to-end product W_K ... W_1.
MmiResult mmi_multilayer(const ChannelParams& params, const Spectrum& spectrum,
                         const std::vector<std::size_t>& widths);

/// Dispatch on the architecture family. For Conv, `spectrum` is the block spectrum.
MmiResult mmi_evaluate(const ArchitectureSpec& arch, const Spectrum& spectrum, const ChannelParams& params);

/// 1/2 sum_{i<=n} log(lambda_i * mean_j(1/lambda_j)).
double mmi_approx_large_n(const Spectrum& spectrum, std::size_t n_tilde);

std::vector<std::pair<double, MmiResult>> mmi_curve(const ArchitectureSpec& arch, const Spectrum& spectrum,
                                                    double sigma2, const std::vector<double>& grid);

/// Budget F in [0, f_max] with MMI(F) = target, by bisection.
double invert_mmi(const ArchitectureSpec& arch, const Spectrum& spectrum, double sigma2, double target_nats,
                  double f_max = 1e6);

}  // namespace mmicap
