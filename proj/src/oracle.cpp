#include "mmicap/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "mmicap/error.hpp"
#include "mmicap/parallel.hpp"
#include "mmicap/waterfill.hpp"

namespace mmicap {

namespace {

Eigen::MatrixXd channel_gram(const Eigen::MatrixXd& w, const Eigen::MatrixXd& cov, double sigma2) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(w.rows(), w.rows());
  a.noalias() += (w * cov * w.transpose()) / sigma2;
  return 0.5 * (a + a.transpose());
}

void check_sigma2(double sigma2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw Error(ErrorCode::InvalidArgument, "sigma2 must be positive");
  }
}

using Objective = std::function<double(const Eigen::MatrixXd&)>;
using Gradient = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

struct Ascent {
  Eigen::MatrixXd point;
  double value = 0.0;
  bool converged = false;
  double gradient_norm = 0.0;
  int iterations = 0;
};

void project_to_ball(Eigen::MatrixXd& w, double budget) {
  const double sq = w.squaredNorm();
  if (sq > budget) w *= std::sqrt(budget / sq);
}

// Gradient norm restricted to the feasible directions: on the sphere the
// radial component cannot be followed.
double projected_gradient_norm(const Eigen::MatrixXd& w, const Eigen::MatrixXd& g, double budget) {
  const double sq = w.squaredNorm();
  if (sq < budget * (1.0 - 1e-10)) return g.norm();
  const double radial = (g.array() * w.array()).sum() / sq;
  if (radial < 0.0) return g.norm();
  return (g - radial * w).norm();
}

Ascent projected_ascent(Eigen::MatrixXd w, double budget, const Objective& f, const Gradient& grad,
                        const OptimizerConfig& cfg) {
  Ascent out;
  project_to_ball(w, budget);
  double value = f(w);
  double step = cfg.step_size;
  for (int it = 0; it < cfg.max_iters; ++it) {
    out.iterations = it + 1;
    const Eigen::MatrixXd g = grad(w);
    out.gradient_norm = projected_gradient_norm(w, g, budget);
    if (out.gradient_norm <= cfg.tolerance) {
      out.converged = true;
      break;
    }
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving) {
      Eigen::MatrixXd trial = w + step * g;
      project_to_ball(trial, budget);
      const double trial_value = f(trial);
      const double predicted = (g.array() * (trial - w).array()).sum();
      if (trial_value >= value + 1e-4 * predicted && trial_value >= value) {
        w = std::move(trial);
        value = trial_value;
        accepted = true;
        step *= 2.0;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No ascent step survives floating-point resolution: stationary to machine precision.
      out.converged = out.gradient_norm <= std::sqrt(cfg.tolerance);
      break;
    }
  }
  out.point = std::move(w);
  out.value = value;
  return out;
}

OptimizeResult best_of_restarts(std::size_t rows, std::size_t cols, double budget, const Objective& f,
                                const Gradient& grad, const OptimizerConfig& cfg) {
  cfg.validate();
  if (budget < 0.0) throw Error(ErrorCode::NegativeBudget, "budget F = " + std::to_string(budget));
  const auto r = static_cast<Eigen::Index>(rows);
  const auto c = static_cast<Eigen::Index>(cols);
  if (budget == 0.0) {
    OptimizeResult zero;
    zero.weights = WeightMatrix(Eigen::MatrixXd::Zero(r, c));
    zero.converged = true;
    return zero;
  }
  std::vector<Ascent> runs(static_cast<std::size_t>(cfg.restarts));
  parallel_for(runs.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      Substream rng(cfg.seed, 0x0a11ce, k);
      Eigen::MatrixXd w0(r, c);
      for (Eigen::Index j = 0; j < c; ++j) {
        for (Eigen::Index i = 0; i < r; ++i) w0(i, j) = rng.normal();
      }
      w0 *= std::sqrt(budget / w0.squaredNorm());
      runs[k] = projected_ascent(std::move(w0), budget, f, grad, cfg);
    }
  });
  std::size_t best = 0;
  for (std::size_t k = 1; k < runs.size(); ++k) {
    if (runs[k].value > runs[best].value) best = k;
  }
  OptimizeResult res;
  res.weights = WeightMatrix(runs[best].point);
  res.achieved_nats = runs[best].value;
  res.converged = runs[best].converged;
  res.gradient_norm = runs[best].gradient_norm;
  res.iterations = runs[best].iterations;
  return res;
}

}  // namespace

void OptimizerConfig::validate() const {
  if (max_iters <= 0 || !(step_size > 0.0) || !(tolerance > 0.0) || restarts < 1) {
    throw Error(ErrorCode::InvalidArgument, "optimizer config needs positive iterations, step, tolerance, restarts");
  }
}

double exact_linear_mi(const Eigen::MatrixXd& w, const Eigen::MatrixXd& cov, double sigma2) {
  check_sigma2(sigma2);
  if (w.cols() != cov.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "W has " + std::to_string(w.cols()) + " columns, covariance is " +
                                                  std::to_string(cov.rows()) + "-dimensional");
  }
  if (w.rows() == 0) return 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt(channel_gram(w, cov, sigma2));
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "Cholesky of I + W Sigma W^T / sigma2 failed");
  }
  // 1/2 log det = sum log L_ii.
  return llt.matrixLLT().diagonal().array().log().sum();
}

double exact_linear_mi(const WeightMatrix& w, const CovarianceMatrix& cov, double sigma2) {
  return exact_linear_mi(w.matrix(), cov.matrix(), sigma2);
}

Eigen::MatrixXd linear_mi_gradient(const Eigen::MatrixXd& w, const Eigen::MatrixXd& cov, double sigma2) {
  Eigen::LLT<Eigen::MatrixXd> llt(channel_gram(w, cov, sigma2));
  return llt.solve(w * cov) / sigma2;
}

WeightMatrix build_optimal_weights(double budget, const Eigensystem& eig, double sigma2, std::size_t n1) {
  const std::size_t n0 = eig.spectrum.size();
  if (n1 == 0) throw Error(ErrorCode::InvalidArgument, "N1 must be >= 1");
  const std::size_t n_tilde = std::min(n0, n1);
  const WaterfillSolution sol = solve_waterfill(budget, eig.spectrum, sigma2, n_tilde);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n1), static_cast<Eigen::Index>(n0));
  for (std::size_t i = 0; i < n_tilde; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    w.row(row) = std::sqrt(sol.allocations[i]) * eig.vectors.col(row).transpose();
  }
  return WeightMatrix(std::move(w));
}

OptimizeResult maximize_mi(double budget, const CovarianceMatrix& cov, double sigma2, std::size_t n1,
                           const OptimizerConfig& config) {
  check_sigma2(sigma2);
  if (n1 == 0) throw Error(ErrorCode::InvalidArgument, "N1 must be >= 1");
  const Eigen::MatrixXd& sigma = cov.matrix();
  auto f = [&](const Eigen::MatrixXd& w) { return exact_linear_mi(w, sigma, sigma2); };
  auto g = [&](const Eigen::MatrixXd& w) { return linear_mi_gradient(w, sigma, sigma2); };
  return best_of_restarts(n1, static_cast<std::size_t>(cov.dim()), budget, f, g, config);
}

Eigen::MatrixXd tie_filter(const Eigen::MatrixXd& filter, int repetitions) {
  const Eigen::Index nf = filter.rows();
  const Eigen::Index nb = filter.cols();
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(nf * repetitions, nb * repetitions);
  for (int r = 0; r < repetitions; ++r) full.block(r * nf, r * nb, nf, nb) = filter;
  return full;
}

OptimizeResult maximize_mi_conv(double budget, const BlockCovariance& block, std::size_t nf, double sigma2,
                                const OptimizerConfig& config) {
  check_sigma2(sigma2);
  if (nf == 0) throw Error(ErrorCode::InvalidArgument, "N_f must be >= 1");
  if (block.repetitions < 1) throw Error(ErrorCode::InvalidArgument, "repetitions must be >= 1");
  const Eigen::MatrixXd full_cov = block.expand().matrix();
  const int reps = block.repetitions;
  const Eigen::Index nb = block.block_dim();
  const auto nf_i = static_cast<Eigen::Index>(nf);
  auto f = [&](const Eigen::MatrixXd& filter) { return exact_linear_mi(tie_filter(filter, reps), full_cov, sigma2); };
  auto g = [&](const Eigen::MatrixXd& filter) {
    const Eigen::MatrixXd full = linear_mi_gradient(tie_filter(filter, reps), full_cov, sigma2);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(nf_i, nb);
    for (int r = 0; r < reps; ++r) acc += full.block(r * nf_i, r * nb, nf_i, nb);
    return acc;
  };
  return best_of_restarts(nf, static_cast<std::size_t>(nb), budget, f, g, config);
}

std::vector<Eigen::MatrixXd> factor_weights(const WeightMatrix& w, const std::vector<std::size_t>& widths) {
  if (widths.empty()) throw Error(ErrorCode::InvalidArgument, "need at least one layer width");
  const Eigen::MatrixXd& m = w.matrix();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto rank = static_cast<std::size_t>(svd.rank());
  const std::size_t narrowest = *std::min_element(widths.begin(), widths.end());
  if (narrowest < rank) {
    throw Error(ErrorCode::InfeasibleFactorization,
                "width " + std::to_string(narrowest) + " is below the product rank " + std::to_string(rank));
  }
  if (widths.back() != static_cast<std::size_t>(m.rows())) {
    throw Error(ErrorCode::DimensionMismatch, "last width " + std::to_string(widths.back()) +
                                                  " must equal the weight rows " + std::to_string(m.rows()));
  }
  std::vector<Eigen::MatrixXd> layers;
  if (widths.size() == 1) {
    layers.push_back(m);
    return layers;
  }
  const auto r = static_cast<Eigen::Index>(rank);
  const Eigen::MatrixXd u = svd.matrixU().leftCols(r);
  const Eigen::MatrixXd sv =
      svd.singularValues().head(r).asDiagonal() * svd.matrixV().leftCols(r).transpose();

  // First layer carries S V^T, middle layers pass the rank-r code through,
  // the last layer applies U.
  Eigen::Index prev = m.cols();
  for (std::size_t k = 0; k < widths.size(); ++k) {
    const auto width = static_cast<Eigen::Index>(widths[k]);
    Eigen::MatrixXd layer = Eigen::MatrixXd::Zero(width, prev);
    if (k == 0) {
      layer.topRows(r) = sv;
    } else if (k + 1 == widths.size()) {
      layer.leftCols(r) = u;
    } else {
      layer.topLeftCorner(r, r).setIdentity();
    }
    layers.push_back(std::move(layer));
    prev = width;
  }
  return layers;
}

double factor_check_multilayer(const WeightMatrix& w, const std::vector<std::size_t>& widths,
                               const CovarianceMatrix& cov, double sigma2) {
  const auto layers = factor_weights(w, widths);
  Eigen::MatrixXd product = layers.front();
  for (std::size_t k = 1; k < layers.size(); ++k) product = layers[k] * product;
  return exact_linear_mi(product, cov.matrix(), sigma2);
}

}  // namespace mmicap
