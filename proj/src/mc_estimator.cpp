#include "mmicap/mc_estimator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <nlohmann/json.hpp>

#include "mmicap/error.hpp"
#include "mmicap/mmi.hpp"
#include "mmicap/parallel.hpp"
#include "mixture_kernel.hpp"

namespace mmicap {

namespace {

// Stream tags for the seeded substreams.
constexpr std::uint64_t kInnerStream = 1;
constexpr std::uint64_t kOuterStream = 2;
constexpr std::uint64_t kConditionalStream = 3;

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Eigen::MatrixXd cholesky_factor(const CovarianceMatrix& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov.matrix());
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "covariance has no Cholesky factor");
  }
  return llt.matrixL();
}

Eigen::VectorXd draw_input(const Eigen::MatrixXd& chol, Substream& rng) {
  Eigen::VectorXd e(chol.rows());
  for (Eigen::Index k = 0; k < e.size(); ++k) e(k) = rng.normal();
  return chol * e;
}

// Channel mean before the output noise: Wx + b, relu(Wx + b), or the bijective
// pre-activation Wx + b.
Eigen::VectorXd channel_centre(const Channel& ch, const Eigen::VectorXd& x) {
  Eigen::VectorXd a = ch.weights.matrix() * x + ch.bias;
  if (ch.kind == ChannelKind::Relu) a = a.cwiseMax(0.0);
  return a;
}

struct OuterTerms {
  std::vector<double> neg_log_density;  // -log p-hat(z_j), z in the noisy pre-output space
  std::vector<double> log_jacobian;     // sum_k log|phi'(a_jk)| (bijective only)
};

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_error_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const auto n = static_cast<double>(v.size());
  return std::sqrt(ss / (n - 1.0) / n);
}

OuterTerms outer_terms(const Channel& ch, const CovarianceMatrix& cov, const MCConfig& mc) {
  mc.validate();
  ch.validate(cov.dim());
  const Eigen::MatrixXd chol = cholesky_factor(cov);
  const Eigen::Index n1 = ch.output_dim();
  const double sigma = std::sqrt(ch.sigma2);
  const double inv_two_s2 = 0.5 / ch.sigma2;
  const double log_norm = std::log(static_cast<double>(mc.n_inner)) + 0.5 * static_cast<double>(n1) *
                                                                           (kLog2Pi + std::log(ch.sigma2));

  // Mixture centres, dimension-major: centres[k * n_inner + i].
  const std::size_t dim = static_cast<std::size_t>(n1);
  std::vector<double> centres(dim * mc.n_inner);
  parallel_for(mc.n_inner, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Substream rng(mc.seed, kInnerStream, i);
      const Eigen::VectorXd c = channel_centre(ch, draw_input(chol, rng));
      for (std::size_t k = 0; k < dim; ++k) centres[k * mc.n_inner + i] = c(static_cast<Eigen::Index>(k));
    }
  });

  OuterTerms out;
  out.neg_log_density.resize(mc.n_outer);
  if (ch.kind == ChannelKind::Bijective) out.log_jacobian.resize(mc.n_outer);
  std::atomic<bool> underflow{false};

  parallel_for(mc.n_outer, [&](std::size_t begin, std::size_t end) {
    std::vector<double> scratch(mc.n_inner);
    Eigen::VectorXd z(n1);
    for (std::size_t j = begin; j < end; ++j) {
      Substream rng(mc.seed, kOuterStream, j);
      const Eigen::VectorXd x = draw_input(chol, rng);
      z = channel_centre(ch, x);
      for (Eigen::Index k = 0; k < n1; ++k) z(k) += sigma * rng.normal();

      const double log_sum = detail::log_gaussian_mixture_sum(centres.data(), mc.n_inner, dim, z.data(),
                                                              inv_two_s2, scratch.data());
      if (!std::isfinite(log_sum)) {
        underflow = true;
        continue;
      }
      out.neg_log_density[j] = -(log_sum - log_norm);

      if (ch.kind == ChannelKind::Bijective) {
        double lj = 0.0;
        for (Eigen::Index k = 0; k < n1; ++k) lj += ch.map->log_derivative(z(k));
        out.log_jacobian[j] = lj;
      }
    }
  });
  if (underflow) throw Error(ErrorCode::NumericalUnderflow, "every mixture term underflowed");
  return out;
}

// H(Z) per-sample terms: -log p_A(a_j) + log|det J_phi(a_j)| for the bijective
// channel, -log p_Z(z_j) otherwise.
std::vector<double> entropy_terms(const OuterTerms& t) {
  std::vector<double> h = t.neg_log_density;
  if (!t.log_jacobian.empty()) {
    for (std::size_t j = 0; j < h.size(); ++j) h[j] += t.log_jacobian[j];
  }
  return h;
}

double noise_entropy(Eigen::Index n1, double sigma2) {
  return 0.5 * static_cast<double>(n1) * (kLog2Pi + 1.0 + std::log(sigma2));
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

BijectiveMap BijectiveMap::tanh() {
  return BijectiveMap{
      "tanh",
      [](double a) { return std::tanh(a); },
      // log(1 - tanh^2 a) = 2 (log 2 - |a| - log1p(exp(-2|a|)))
      [](double a) {
        const double m = std::abs(a);
        return 2.0 * (std::numbers::ln2 - m - std::log1p(std::exp(-2.0 * m)));
      },
  };
}

Channel Channel::linear(WeightMatrix w, double sigma2) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(w.rows());
  return linear(std::move(w), std::move(b), sigma2);
}

Channel Channel::linear(WeightMatrix w, Eigen::VectorXd bias, double sigma2) {
  return Channel{std::move(w), std::move(bias), sigma2, ChannelKind::Linear, std::nullopt};
}

Channel Channel::relu(WeightMatrix w, Eigen::VectorXd bias, double sigma2) {
  return Channel{std::move(w), std::move(bias), sigma2, ChannelKind::Relu, std::nullopt};
}

Channel Channel::bijective(WeightMatrix w, Eigen::VectorXd bias, double sigma2, BijectiveMap map) {
  return Channel{std::move(w), std::move(bias), sigma2, ChannelKind::Bijective, std::move(map)};
}

void Channel::validate(Eigen::Index input_dim) const {
  if (weights.cols() != input_dim) {
    throw Error(ErrorCode::DimensionMismatch, "W has " + std::to_string(weights.cols()) +
                                                  " columns for a " + std::to_string(input_dim) + "-dim input");
  }
  if (bias.size() != weights.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "bias length " + std::to_string(bias.size()) + " vs " +
                                                  std::to_string(weights.rows()) + " outputs");
  }
  if (!(sigma2 > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma2 must be positive");
  if (kind == ChannelKind::Bijective && (!map || !map->log_derivative)) {
    throw Error(ErrorCode::InvalidArgument, "bijective channel needs an activation with a log-derivative");
  }
}

void MCConfig::validate() const {
  if (n_outer < 100 || n_inner < 100) {
    throw Error(ErrorCode::InvalidArgument, "Monte-Carlo sample counts must be >= 100");
  }
}

Eigen::MatrixXd sample_gaussian_inputs(const CovarianceMatrix& cov, std::size_t n, std::uint64_t seed,
                                       std::uint64_t stream) {
  const Eigen::MatrixXd chol = cholesky_factor(cov);
  Eigen::MatrixXd out(cov.dim(), static_cast<Eigen::Index>(n));
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      Substream rng(seed, stream, j);
      out.col(static_cast<Eigen::Index>(j)) = draw_input(chol, rng);
    }
  });
  return out;
}

MCEstimate estimate_entropy(const Channel& channel, const CovarianceMatrix& cov, const MCConfig& mc) {
  const std::vector<double> h = entropy_terms(outer_terms(channel, cov, mc));
  return MCEstimate{mean_of(h), std_error_of(h), mc};
}

MCEstimate estimate_mi(const Channel& channel, const CovarianceMatrix& cov, const MCConfig& mc) {
  MCEstimate h = estimate_entropy(channel, cov, mc);
  h.value -= noise_entropy(channel.output_dim(), channel.sigma2);
  if (channel.kind != ChannelKind::Bijective) return h;

  // E[log|phi'(A)|] under the conditional draws, on its own stream.
  const Eigen::MatrixXd chol = cholesky_factor(cov);
  const double sigma = std::sqrt(channel.sigma2);
  std::vector<double> lj(mc.n_outer);
  parallel_for(mc.n_outer, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      Substream rng(mc.seed, kConditionalStream, j);
      Eigen::VectorXd a = channel_centre(channel, draw_input(chol, rng));
      double acc = 0.0;
      for (Eigen::Index k = 0; k < a.size(); ++k) acc += channel.map->log_derivative(a(k) + sigma * rng.normal());
      lj[j] = acc;
    }
  });
  const double se = std_error_of(lj);
  h.value -= mean_of(lj);
  h.std_error = std::sqrt(h.std_error * h.std_error + se * se);
  return h;
}

double delta_bound(const ReluModel& model, const CovarianceMatrix& cov) {
  const Eigen::MatrixXd& w = model.weights.matrix();
  if (w.cols() != cov.dim() || model.bias.size() != w.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "relu model does not conform to the covariance");
  }
  const Eigen::VectorXd var = (w * cov.matrix() * w.transpose()).diagonal();
  double total = 0.0;
  for (Eigen::Index i = 0; i < var.size(); ++i) {
    const double b = model.bias(i);
    if (var(i) <= 0.0) {
      // Deterministic pre-activation: relu differs from identity iff b < 0.
      total += b < 0.0 ? 1.0 : 0.0;
    } else {
      total += standard_normal_cdf(-b / std::sqrt(var(i)));
    }
  }
  return std::clamp(total, 0.0, 1.0);
}

double binary_entropy(double delta) {
  if (delta < 0.0 || delta > 1.0) throw Error(ErrorCode::DeltaOutOfRange, "binary entropy needs [0, 1]");
  auto xlogx = [](double p) { return p > 0.0 ? p * std::log(p) : 0.0; };
  return -xlogx(delta) - xlogx(1.0 - delta);
}

double g_bound(double delta, double sigma2, std::size_t n1) {
  if (!(delta >= 0.0) || delta >= 1.0 / std::numbers::e) {
    throw Error(ErrorCode::DeltaOutOfRange, "delta = " + std::to_string(delta) + " must lie in [0, 1/e)");
  }
  if (!(sigma2 > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma2 must be positive");
  if (delta == 0.0) return 0.0;
  // log M = max(0, -N1/2 log(2 pi sigma2))
  const double log_m = std::max(0.0, -0.5 * static_cast<double>(n1) * (kLog2Pi + std::log(sigma2)));
  return 4.0 * delta * std::abs(std::log(2.0 * delta)) + 2.0 * delta * log_m + 2.0 * binary_entropy(delta);
}

nlohmann::json ReluReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"scale", r.scale},
                         {"delta_bound", r.delta_bound},
                         {"g_bound", r.g_bound ? nlohmann::json(*r.g_bound) : nlohmann::json(nullptr)},
                         {"mi_estimate", r.mi_estimate},
                         {"std_error", r.std_error},
                         {"closed_form", r.closed_form},
                         {"gap", r.gap}});
  }
  return {{"theorem", theorem}, {"rows", rows_json}, {"pass", pass}};
}

ReluReport verify_relu_theorem(double budget, const CovarianceMatrix& cov, double sigma2, std::size_t n1,
                               const std::vector<double>& bias_scales, const MCConfig& mc) {
  if (bias_scales.empty()) throw Error(ErrorCode::InvalidArgument, "need at least one bias scale");
  for (std::size_t i = 0; i < bias_scales.size(); ++i) {
    if (!(bias_scales[i] > 0.0) || (i > 0 && bias_scales[i] <= bias_scales[i - 1])) {
      throw Error(ErrorCode::InvalidArgument, "bias scales must be positive and ascending");
    }
  }
  const Eigensystem eig = eigvals_from_covariance(cov);
  const WeightMatrix w = build_optimal_weights(budget, eig, sigma2, n1);
  const double closed = mmi_fc(ChannelParams{sigma2, budget}, eig.spectrum, eig.spectrum.size(), n1).nats;
  const auto out_dim = static_cast<Eigen::Index>(n1);

  ReluReport report;
  for (double c : bias_scales) {
    const ReluModel model{w, Eigen::VectorXd::Constant(out_dim, c), sigma2};
    ReluRow row;
    row.scale = c;
    row.delta_bound = delta_bound(model, cov);
    if (row.delta_bound < 1.0 / std::numbers::e) row.g_bound = g_bound(row.delta_bound, sigma2, n1);
    const MCEstimate est = estimate_mi(model.relu_channel(), cov, mc);
    row.mi_estimate = est.value;
    row.std_error = est.std_error;
    row.closed_form = closed;
    row.gap = closed - est.value;
    report.rows.push_back(row);
  }

  bool pass = true;
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    const auto& prev = report.rows[i - 1];
    const auto& cur = report.rows[i];
    const double slack = 3.0 * std::hypot(prev.std_error, cur.std_error);
    if (cur.gap > prev.gap + slack) pass = false;
  }
  const auto& last = report.rows.back();
  if (!last.g_bound || std::abs(last.gap) > *last.g_bound + 3.0 * last.std_error) pass = false;
  report.pass = pass;
  return report;
}

nlohmann::json OrderingReport::to_json() const {
  return {{"theorem", "relu_entropy_ordering"},
          {"relu_entropy", relu_entropy.value},
          {"relu_std_error", relu_entropy.std_error},
          {"linear_entropy", linear_entropy.value},
          {"linear_std_error", linear_entropy.std_error},
          {"difference", difference},
          {"combined_std_error", combined_std_error},
          {"pass", pass}};
}

OrderingReport verify_entropy_ordering(const ReluModel& model, const CovarianceMatrix& cov, const MCConfig& mc) {
  const std::vector<double> relu = entropy_terms(outer_terms(model.relu_channel(), cov, mc));
  const std::vector<double> lin = entropy_terms(outer_terms(model.linear_channel(), cov, mc));
  std::vector<double> diff(relu.size());
  for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = relu[j] - lin[j];

  OrderingReport r;
  r.relu_entropy = MCEstimate{mean_of(relu), std_error_of(relu), mc};
  r.linear_entropy = MCEstimate{mean_of(lin), std_error_of(lin), mc};
  r.difference = mean_of(diff);
  r.combined_std_error = std_error_of(diff);
  r.pass = r.relu_entropy.value <= r.linear_entropy.value + 3.0 * r.combined_std_error;
  return r;
}

}  // namespace mmicap
