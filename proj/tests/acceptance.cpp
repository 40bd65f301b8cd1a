// Acceptance suite: one line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mmicap/cli.hpp"
#include "mmicap/error.hpp"
#include "mmicap/mc_estimator.hpp"
#include "mmicap/mmi.hpp"
#include "mmicap/oracle.hpp"
#include "mmicap/waterfill.hpp"
#include "test_support.hpp"

using namespace mmicap;
using mmicap::testing::gaussian_matrix;
using mmicap::testing::random_spectrum;
using mmicap::testing::random_weights;
using mmicap::testing::rotated_covariance;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// 1: water-filling weights attain the closed form.
Outcome achievability() {
  std::mt19937_64 rng(101);
  const double sigmas[] = {0.1, 1.0, 10.0};
  double worst = 0.0;
  std::size_t cases = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t n0 = pick(rng, 1, 16);
    const std::size_t n1 = pick(rng, 1, 16);
    const double s2 = sigmas[inst % 3];
    const Spectrum spec = random_spectrum(rng, n0);
    const CovarianceMatrix cov(rotated_covariance(rng, spec));
    const Eigensystem eig = eigvals_from_covariance(cov);
    const std::size_t nt = std::min(n0, n1);
    const Breakpoints bp = breakpoints(eig.spectrum, s2, nt);

    std::vector<double> budgets{0.0};
    for (std::size_t k = 2; k <= nt; ++k) {
      const double r = bp.at(k);
      budgets.insert(budgets.end(), {r * (1 - 1e-3), r, r * (1 + 1e-3)});
    }
    const double top = nt >= 2 ? bp.at(nt) : s2 / eig.spectrum[0];
    budgets.insert(budgets.end(), {2.0 * top + 1e-3, 10.0 * top + 1.0});

    for (const double f : budgets) {
      const double closed = mmi_fc({s2, f}, eig.spectrum, n0, n1).nats;
      const double attained = exact_linear_mi(build_optimal_weights(f, eig, s2, n1), cov, s2);
      worst = std::max(worst, std::abs(closed - attained));
      ++cases;
    }
  }
  return {worst <= 1e-9, fmt("%.0f budgets, max |gap| %.3g", static_cast<double>(cases), worst)};
}

// 2: the numerical optimizer reaches the closed form and never beats it.
Outcome optimality() {
  std::mt19937_64 rng(202);
  double worst_gap = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t n0 = pick(rng, 2, 8);
    const std::size_t n1 = pick(rng, 1, 8);
    const double s2 = 1.0;
    const Spectrum spec = random_spectrum(rng, n0, 0.1, 10.0);
    const CovarianceMatrix cov(rotated_covariance(rng, spec));
    const double f = uniform(rng, 0.5, 10.0);
    const double closed = mmi_fc({s2, f}, spec, n0, n1).nats;
    OptimizerConfig oc;
    oc.seed = static_cast<std::uint64_t>(inst);
    const OptimizeResult r = maximize_mi(f, cov, s2, n1, oc);
    worst_gap = std::max(worst_gap, closed - r.achieved_nats);
  }

  double worst_excess = -1e300;
  for (int inst = 0; inst < 500; ++inst) {
    const std::size_t n0 = pick(rng, 1, 8);
    const std::size_t n1 = pick(rng, 1, 8);
    const double s2 = std::pow(10.0, uniform(rng, -1.0, 1.0));
    const Spectrum spec = random_spectrum(rng, n0, 0.1, 10.0);
    const CovarianceMatrix cov(rotated_covariance(rng, spec));
    const double f = uniform(rng, 0.01, 20.0);
    const double closed = mmi_fc({s2, f}, spec, n0, n1).nats;
    const Eigen::MatrixXd w = random_weights(rng, static_cast<Eigen::Index>(n1), static_cast<Eigen::Index>(n0),
                                             f * uniform(rng, 0.0, 1.0));
    worst_excess = std::max(worst_excess, exact_linear_mi(w, cov.matrix(), s2) - closed);
  }
  return {worst_gap <= 1e-4 && worst_excess <= 1e-9,
          fmt("max shortfall %.3g, max excess %.3g", worst_gap, worst_excess)};
}

// 3: breakpoints start at zero and never decrease.
Outcome breakpoint_monotonicity() {
  std::mt19937_64 rng(303);
  int bad = 0;
  for (int inst = 0; inst < 1000; ++inst) {
    const std::size_t n = pick(rng, 1, 64);
    const double s2 = std::pow(10.0, uniform(rng, -2.0, 2.0));
    const Breakpoints bp = breakpoints(random_spectrum(rng, n), s2, n);
    bool ok = bp.at(1) == 0.0;
    for (std::size_t k = 2; k <= n; ++k) ok = ok && bp.at(k) >= bp.at(k - 1);
    if (!ok) ++bad;
  }
  return {bad == 0, fmt("%.0f of 1000 sequences violate", bad)};
}

std::vector<double> csv_column(const std::string& text, std::size_t col) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t i = 0; i <= col; ++i) std::getline(ss, cell, ',');
    out.push_back(std::stod(cell));
  }
  return out;
}

// 4: neighbouring regime formulas meet at each breakpoint; preset curves.
Outcome piecewise_consistency() {
  std::mt19937_64 rng(404);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = pick(rng, 2, 32);
    const double s2 = std::pow(10.0, uniform(rng, -1.0, 1.0));
    const Spectrum spec = random_spectrum(rng, n);
    const Breakpoints bp = breakpoints(spec, s2, n);
    for (std::size_t k = 2; k <= n; ++k) {
      const double r = bp.at(k);
      const double below = mmi_regime_formula(spec, s2, r, k - 1);
      const double above = mmi_regime_formula(spec, s2, r, k);
      worst = std::max(worst, std::abs(below - above));
    }
  }

  bool curves_ok = true;
  for (const std::string side : {"left", "right"}) {
    std::ostringstream out, err;
    if (cli::run({"curve", "--figure1", side}, out, err) != 0) {
      curves_ok = false;
      continue;
    }
    const std::vector<double> f = csv_column(out.str(), 0);
    const std::vector<double> m = csv_column(out.str(), 1);
    curves_ok = curves_ok && !m.empty() && f.front() == 0.0 && m.front() == 0.0;
    for (std::size_t i = 1; i < m.size(); ++i) curves_ok = curves_ok && m[i] >= m[i - 1];
  }
  return {worst <= 1e-10 && curves_ok,
          fmt("max boundary gap %.3g, preset curves ", worst) + (curves_ok ? "ok" : "bad")};
}

// 5: tied convolution filters reach repetitions x fully connected.
Outcome convolution() {
  std::mt19937_64 rng(505);
  struct Shape {
    std::size_t n0, nb, nf;
  };
  double worst_gap = 0.0;
  bool identity = true;
  for (const Shape sh : {Shape{4, 2, 2}, Shape{6, 3, 2}}) {
    const Spectrum spec = random_spectrum(rng, sh.nb, 0.2, 5.0);
    const BlockCovariance block{CovarianceMatrix(rotated_covariance(rng, spec)),
                                static_cast<int>(sh.n0 / sh.nb)};
    const double f = 2.0;
    const double s2 = 1.0;
    const MmiResult conv = mmi_conv({s2, f}, block, sh.nf);
    const MmiResult fc = mmi_fc({s2, f}, eigvals_from_covariance(block.block).spectrum, sh.nb, sh.nf);
    identity = identity && conv.nats == static_cast<double>(block.repetitions) * fc.nats;
    OptimizerConfig oc;
    oc.seed = sh.n0;
    const OptimizeResult r = maximize_mi_conv(f, block, sh.nf, s2, oc);
    worst_gap = std::max(worst_gap, std::abs(conv.nats - r.achieved_nats));
  }
  return {worst_gap <= 1e-4 && identity,
          fmt("max |optimizer - closed| %.3g, identity ", worst_gap) + (identity ? "exact" : "broken")};
}

// 6: multilayer bottleneck and exact factorization.
Outcome multilayer() {
  std::mt19937_64 rng(606);
  bool equal = true;
  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t n0 = pick(rng, 2, 10);
    const std::size_t layers = pick(rng, 2, 4);
    std::vector<std::size_t> widths;
    for (std::size_t l = 0; l < layers; ++l) widths.push_back(pick(rng, 1, 10));
    const std::size_t bottleneck = *std::min_element(widths.begin(), widths.end());
    const double s2 = std::pow(10.0, uniform(rng, -1.0, 1.0));
    const double f = uniform(rng, 0.1, 20.0);
    const Spectrum spec = random_spectrum(rng, n0, 0.1, 10.0);
    const double fc = mmi_fc({s2, f}, spec, n0, std::min(bottleneck, n0)).nats;
    equal = equal && mmi_multilayer({s2, f}, spec, widths).nats == fc;

    const CovarianceMatrix cov(rotated_covariance(rng, spec));
    const Eigensystem eig = eigvals_from_covariance(cov);
    // Water-filling optimum through the bottleneck, padded to the output width.
    const std::size_t n1 = widths.back();
    const Eigen::MatrixXd core = build_optimal_weights(f, eig, s2, std::min(bottleneck, n0)).matrix();
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n1), static_cast<Eigen::Index>(n0));
    padded.topRows(std::min(core.rows(), padded.rows())) = core.topRows(std::min(core.rows(), padded.rows()));
    const WeightMatrix w(padded);
    worst = std::max(worst, std::abs(factor_check_multilayer(w, widths, cov, s2) - exact_linear_mi(w, cov, s2)));
  }
  return {equal && worst <= 1e-12,
          fmt("max factorization drift %.3g, bottleneck identity ", worst) + (equal ? "exact" : "broken")};
}

Eigen::MatrixXd exp_decay_covariance(std::size_t n, double rate) {
  const Spectrum s = model_spectrum(ExpDecay{rate}, n);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = s[i];
  return m;
}

// 7: relu with a large bias approaches the linear optimum.
Outcome relu_large_bias() {
  const CovarianceMatrix cov(exp_decay_covariance(4, 0.5));
  MCConfig mc;
  mc.n_outer = mc.n_inner = 20000;
  mc.seed = 7;
  const ReluReport rep = verify_relu_theorem(3.0, cov, 1.0, 3, {2.0, 4.0, 8.0}, mc);
  const ReluRow& last = rep.rows.back();
  const bool close = std::abs(last.gap) <= std::max(0.02, 3.0 * last.std_error);
  bool shrinking = true;
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    const double slack = 3.0 * std::hypot(rep.rows[i].std_error, rep.rows[i - 1].std_error);
    shrinking = shrinking && std::abs(rep.rows[i].gap) <= std::abs(rep.rows[i - 1].gap) + slack;
  }
  std::string gaps;
  for (const ReluRow& r : rep.rows) gaps += fmt(" %.4f", r.gap);
  return {close && shrinking && rep.pass, fmt("gap at b=8 %.4f (se %.4f), gaps", last.gap, last.std_error) + gaps};
}

// 8: relu never increases output entropy.
Outcome entropy_ordering() {
  std::mt19937_64 rng(808);
  int failures = 0;
  double worst_z = -1e300;
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t n0 = pick(rng, 1, 4);
    const std::size_t n1 = pick(rng, 1, 3);
    const Spectrum spec = random_spectrum(rng, n0, 0.1, 10.0);
    const CovarianceMatrix cov(rotated_covariance(rng, spec));
    ReluModel model;
    model.weights = WeightMatrix(gaussian_matrix(rng, static_cast<Eigen::Index>(n1), static_cast<Eigen::Index>(n0)));
    model.bias = 2.0 * gaussian_matrix(rng, static_cast<Eigen::Index>(n1), 1).col(0);
    model.sigma2 = std::pow(10.0, uniform(rng, -0.5, 0.5));
    MCConfig mc;
    mc.n_outer = mc.n_inner = 10000;
    mc.seed = static_cast<std::uint64_t>(inst);
    const OrderingReport rep = verify_entropy_ordering(model, cov, mc);
    const double bound = rep.linear_entropy.value + 3.0 * rep.combined_std_error;
    if (rep.relu_entropy.value > bound) ++failures;
    if (rep.combined_std_error > 0) worst_z = std::max(worst_z, rep.difference / rep.combined_std_error);
  }
  return {failures == 0, fmt("%.0f of 50 violate, max (H_relu - H)/se %.2f", failures, worst_z)};
}

// 9: total-variation bound machinery.
Outcome g_bound_checks() {
  const double d = 0.1;
  const double hand = 4 * d * std::abs(std::log(2 * d)) + 2 * (-d * std::log(d) - (1 - d) * std::log(1 - d));
  const double g = g_bound(d, 1.0, 3);
  const bool value = std::abs(g - hand) <= 1e-9 && std::abs(g - 1.29394) <= 1e-5;

  bool rejects = true;
  for (const double bad : {1.0 / std::numbers::e, 0.5, 1.0}) {
    try {
      g_bound(bad, 1.0, 3);
      rejects = false;
    } catch (const Error& e) {
      rejects = rejects && e.code() == ErrorCode::DeltaOutOfRange;
    }
  }

  bool vanishes = true;
  double prev = 1e300;
  for (int e = 1; e <= 15; ++e) {
    const double v = g_bound(std::pow(10.0, -e), 0.5, 3);
    vanishes = vanishes && v < prev;
    prev = v;
  }
  vanishes = vanishes && prev < 1e-12 && g_bound(0.0, 0.5, 3) == 0.0;
  return {value && rejects && vanishes,
          fmt("g(0.1) %.9f vs hand %.9f, g(1e-15) %.3g", g, hand, prev)};
}

// 10: an invertible activation leaves MI unchanged.
Outcome bijective_invariance() {
  std::mt19937_64 rng(1010);
  int failures = 0;
  double worst_z = 0.0;
  for (int inst = 0; inst < 10; ++inst) {
    const std::size_t n0 = pick(rng, 1, 4);
    const std::size_t n1 = pick(rng, 1, 3);
    const Spectrum spec = random_spectrum(rng, n0, 0.1, 2.0);
    const CovarianceMatrix cov(rotated_covariance(rng, spec));
    const WeightMatrix w(0.7 * gaussian_matrix(rng, static_cast<Eigen::Index>(n1), static_cast<Eigen::Index>(n0)));
    const Eigen::VectorXd b = 0.5 * gaussian_matrix(rng, static_cast<Eigen::Index>(n1), 1).col(0);
    const double s2 = uniform(rng, 0.3, 1.5);
    MCConfig mc;
    mc.n_outer = mc.n_inner = 10000;
    mc.seed = 100 + static_cast<std::uint64_t>(inst);
    const MCEstimate lin = estimate_mi(Channel::linear(w, b, s2), cov, mc);
    const MCEstimate bij = estimate_mi(Channel::bijective(w, b, s2, BijectiveMap::tanh()), cov, mc);
    const double se = std::hypot(lin.std_error, bij.std_error);
    const double z = std::abs(lin.value - bij.value) / se;
    worst_z = std::max(worst_z, z);
    if (z > 3.0) ++failures;
  }
  return {failures == 0, fmt("%.0f of 10 differ by > 3 se, max |diff|/se %.2f", failures, worst_z)};
}

std::string verify_output(const char* threads) {
  setenv("MMI_THREADS", threads, 1);
  std::ostringstream out, err;
  const int code = cli::run({"verify", "--seed", "11", "--out", "json"}, out, err);
  unsetenv("MMI_THREADS");
  return std::to_string(code) + "\n" + out.str();
}

// 11: verify reports are byte-identical across runs and thread counts.
Outcome determinism() {
  const std::string ref = verify_output("1");
  bool same = ref.size() > 2;
  for (const char* t : {"1", "2", "3", "8"}) same = same && verify_output(t) == ref;
  return {same, same ? "identical across 5 runs with 1, 2, 3, 8 threads" : "reports differ"};
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> check;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "achievability", 10, achievability},
      {2, "optimality", 60, optimality},
      {3, "breakpoint_monotonicity", 5, breakpoint_monotonicity},
      {4, "piecewise_consistency", 5, piecewise_consistency},
      {5, "convolution", 60, convolution},
      {6, "multilayer", 10, multilayer},
      {7, "relu_large_bias", 300, relu_large_bias},
      {8, "entropy_ordering", 300, entropy_ordering},
      {9, "g_bound", 1, g_bound_checks},
      {10, "bijective_invariance", 180, bijective_invariance},
      {11, "determinism", 300, determinism},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s %2d %-24s %8.2fs (limit %gs)  %s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs,
                c.limit_seconds, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
