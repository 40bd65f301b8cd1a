#include "mmicap/mmi.hpp"

#include <algorithm>
#include <cmath>

#include "mmicap/error.hpp"

namespace mmicap {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Relu: return "relu";
    case Activation::Bijective: return "bijective";
  }
  return "unknown";
}

void ArchitectureSpec::validate() const {
  std::visit(
      [](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, FullyConnected>) {
          if (f.n0 == 0 || f.n1 == 0) throw Error(ErrorCode::InvalidArgument, "fc dimensions must be >= 1");
        } else if constexpr (std::is_same_v<T, Conv>) {
          if (f.n0 == 0 || f.nb == 0 || f.nf == 0) {
            throw Error(ErrorCode::InvalidArgument, "conv dimensions must be >= 1");
          }
          if (f.n0 % f.nb != 0) {
            throw Error(ErrorCode::DimensionMismatch,
                        "block size " + std::to_string(f.nb) + " does not divide input " + std::to_string(f.n0));
          }
        } else {
          if (f.n0 == 0) throw Error(ErrorCode::InvalidArgument, "input dimension must be >= 1");
          if (f.widths.empty()) throw Error(ErrorCode::InvalidArgument, "multilayer needs at least one width");
          for (auto w : f.widths) {
            if (w == 0) throw Error(ErrorCode::InvalidArgument, "layer widths must be >= 1");
          }
        }
      },
      family);
}

std::size_t ArchitectureSpec::n_tilde() const {
  return std::visit(
      [](const auto& f) -> std::size_t {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, FullyConnected>) {
          return std::min(f.n0, f.n1);
        } else if constexpr (std::is_same_v<T, Conv>) {
          return std::min(f.nb, f.nf);
        } else {
          return std::min(f.n0, *std::min_element(f.widths.begin(), f.widths.end()));
        }
      },
      family);
}

std::size_t ArchitectureSpec::spectrum_dim() const {
  if (const auto* c = std::get_if<Conv>(&family)) return c->nb;
  return std::visit([](const auto& f) { return f.n0; }, family);
}

void ChannelParams::validate() const {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw Error(ErrorCode::InvalidArgument, "sigma2 must be positive, got " + std::to_string(sigma2));
  }
  if (budget < 0.0 || !std::isfinite(budget)) {
    throw Error(ErrorCode::NegativeBudget, "budget F = " + std::to_string(budget));
  }
}

double mmi_regime_formula(const Spectrum& spectrum, double sigma2, double budget, std::size_t active) {
  if (active < 1 || active > spectrum.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "active component count " + std::to_string(active));
  }
  double inv_trace = 0.0;
  double log_det = 0.0;
  for (std::size_t i = 0; i < active; ++i) {
    inv_trace += 1.0 / spectrum[i];
    log_det += std::log(spectrum[i]);
  }
  const double m = static_cast<double>(active);
  return 0.5 * m * std::log((budget + sigma2 * inv_trace) / (sigma2 * m)) + 0.5 * log_det;
}

MmiResult mmi_fc(const ChannelParams& params, const Spectrum& spectrum, std::size_t n0, std::size_t n1) {
  params.validate();
  if (spectrum.size() != n0) {
    throw Error(ErrorCode::DimensionMismatch, "spectrum has " + std::to_string(spectrum.size()) +
                                                  " eigenvalues but N0 = " + std::to_string(n0));
  }
  if (n1 == 0) throw Error(ErrorCode::InvalidArgument, "N1 must be >= 1");

  MmiResult r;
  r.n_tilde = std::min(n0, n1);
  r.breakpoints = breakpoints(spectrum, params.sigma2, r.n_tilde);
  r.regime_K = regime(params.budget, r.breakpoints);
  r.active_components = r.n_tilde - r.regime_K;
  if (params.budget > 0.0) {
    r.nats = std::max(0.0, mmi_regime_formula(spectrum, params.sigma2, params.budget, r.active_components));
  }
  return r;
}

MmiResult mmi_conv(const ChannelParams& params, const Spectrum& block_spectrum, std::size_t repetitions,
                   std::size_t nf) {
  if (repetitions == 0) throw Error(ErrorCode::InvalidArgument, "repetitions must be >= 1");
  MmiResult r = mmi_fc(params, block_spectrum, block_spectrum.size(), nf);
  r.nats *= static_cast<double>(repetitions);
  return r;
}

MmiResult mmi_conv(const ChannelParams& params, const BlockCovariance& block, std::size_t nf) {
  const Eigensystem es = eigvals_from_covariance(block.block);
  if (block.repetitions < 1) throw Error(ErrorCode::InvalidArgument, "repetitions must be >= 1");
  return mmi_conv(params, es.spectrum, static_cast<std::size_t>(block.repetitions), nf);
}

MmiResult mmi_multilayer(const ChannelParams& params, const Spectrum& spectrum,
                         const std::vector<std::size_t>& widths) {
  if (widths.empty()) throw Error(ErrorCode::InvalidArgument, "multilayer needs at least one width");
  const std::size_t narrowest = *std::min_element(widths.begin(), widths.end());
  if (narrowest == 0) throw Error(ErrorCode::InvalidArgument, "layer widths must be >= 1");
  return mmi_fc(params, spectrum, spectrum.size(), narrowest);
}

MmiResult mmi_evaluate(const ArchitectureSpec& arch, const Spectrum& spectrum, const ChannelParams& params) {
  arch.validate();
  MmiResult r = std::visit(
      [&](const auto& f) -> MmiResult {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, FullyConnected>) {
          return mmi_fc(params, spectrum, f.n0, f.n1);
        } else if constexpr (std::is_same_v<T, Conv>) {
          if (spectrum.size() != f.nb) {
            throw Error(ErrorCode::DimensionMismatch, "block spectrum has " + std::to_string(spectrum.size()) +
                                                          " eigenvalues but N_B = " + std::to_string(f.nb));
          }
          return mmi_conv(params, spectrum, f.n0 / f.nb, f.nf);
        } else {
          if (spectrum.size() != f.n0) {
            throw Error(ErrorCode::DimensionMismatch, "spectrum has " + std::to_string(spectrum.size()) +
                                                          " eigenvalues but N0 = " + std::to_string(f.n0));
          }
          return mmi_multilayer(params, spectrum, f.widths);
        }
      },
      arch.family);
  r.activation = arch.activation;
  return r;
}

double mmi_approx_large_n(const Spectrum& spectrum, std::size_t n_tilde) {
  if (n_tilde < 1 || n_tilde > spectrum.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "n_tilde " + std::to_string(n_tilde));
  }
  double mean_inv = 0.0;
  for (std::size_t i = 0; i < n_tilde; ++i) mean_inv += 1.0 / spectrum[i];
  mean_inv /= static_cast<double>(n_tilde);
  double acc = 0.0;
  for (std::size_t i = 0; i < n_tilde; ++i) acc += std::log(spectrum[i] * mean_inv);
  return 0.5 * acc;
}

std::vector<std::pair<double, MmiResult>> mmi_curve(const ArchitectureSpec& arch, const Spectrum& spectrum,
                                                    double sigma2, const std::vector<double>& grid) {
  std::vector<std::pair<double, MmiResult>> out;
  out.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0.0) throw Error(ErrorCode::NegativeBudget, "grid value " + std::to_string(grid[i]));
    if (i > 0 && grid[i] < grid[i - 1]) throw Error(ErrorCode::InvalidArgument, "budget grid must be ascending");
    out.emplace_back(grid[i], mmi_evaluate(arch, spectrum, ChannelParams{sigma2, grid[i]}));
  }
  return out;
}

double invert_mmi(const ArchitectureSpec& arch, const Spectrum& spectrum, double sigma2, double target_nats,
                  double f_max) {
  if (!(target_nats > 0.0)) throw Error(ErrorCode::InvalidArgument, "target must be positive");
  if (!(f_max > 0.0)) throw Error(ErrorCode::InvalidArgument, "F_max must be positive");
  auto value = [&](double f) { return mmi_evaluate(arch, spectrum, ChannelParams{sigma2, f}).nats; };
  const double top = value(f_max);
  if (top < target_nats) {
    throw Error(ErrorCode::TargetUnreachable,
                "MMI(F_max = " + std::to_string(f_max) + ") = " + std::to_string(top) + " nats");
  }
  double lo = 0.0;
  double hi = f_max;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (value(mid) < target_nats ? lo : hi) = mid;
  }
  return std::abs(value(lo) - target_nats) <= std::abs(value(hi) - target_nats) ? lo : hi;
}

}  // namespace mmicap
