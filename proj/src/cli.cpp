#include "mmicap/cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mmicap/error.hpp"
#include "mmicap/mc_estimator.hpp"
#include "mmicap/oracle.hpp"
#include "mmicap/waterfill.hpp"

namespace mmicap::cli {

namespace {

using nlohmann::json;

// Raised for bad user input; maps to exit code 2.
struct ConfigError : std::runtime_error {
  ConfigError(const std::string& field, const std::string& msg) : std::runtime_error(field + ": " + msg) {}
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

double to_double(const std::string& s, const std::string& field) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) throw ConfigError(field, "bad number '" + s + "'");
  return v;
}

std::size_t to_size(const std::string& s, const std::string& field) {
  std::size_t v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(field, "bad integer '" + s + "'");
  return v;
}

struct SpectrumSource {
  Spectrum spectrum;
  std::optional<CovarianceMatrix> cov;
};

SpectrumSource resolve_spectrum(const std::string& text, std::size_t dim) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  try {
    if (kind == "exp") return {model_spectrum(ExpDecay{to_double(arg, "--spectrum")}, dim), std::nullopt};
    if (kind == "harmonic") return {model_spectrum(Harmonic{}, dim), std::nullopt};
    if (kind == "list") {
      std::vector<double> values;
      for (const auto& p : split(arg, ',')) values.push_back(to_double(p, "--spectrum"));
      Spectrum s(std::move(values));
      if (s.size() != dim) {
        throw ConfigError("--spectrum", std::to_string(s.size()) + " eigenvalues for an architecture expecting " +
                                            std::to_string(dim));
      }
      return {s, std::nullopt};
    }
    if (kind == "file") {
      if (arg.size() >= 5 && arg.substr(arg.size() - 5) == ".json") {
        std::ifstream in(arg);
        if (!in) throw ConfigError("--spectrum", "cannot open '" + arg + "'");
        json doc;
        try {
          doc = json::parse(in);
        } catch (const json::exception& e) {
          throw ConfigError("--spectrum", e.what());
        }
        Spectrum s = spectrum_from_json(doc);
        if (s.size() != dim) throw ConfigError("--spectrum", "spectrum length does not match the architecture");
        return {s, std::nullopt};
      }
      CovarianceMatrix cov = read_covariance_csv_file(arg);
      if (static_cast<std::size_t>(cov.dim()) != dim) {
        throw ConfigError("--spectrum", "covariance is " + std::to_string(cov.dim()) +
                                            "-dimensional, architecture expects " + std::to_string(dim));
      }
      Spectrum s = eigvals_from_covariance(cov).spectrum;
      return {s, std::move(cov)};
    }
  } catch (const Error& e) {
    throw ConfigError("--spectrum", e.what());
  }
  throw ConfigError("--spectrum", "unknown source '" + text + "'");
}

double convert(double nats, Units u) { return u == Units::Bits ? nats / std::numbers::ln2 : nats; }
std::string units_name(Units u) { return u == Units::Bits ? "bits" : "nats"; }

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;  // numbers or strings
};

void write_table(std::ostream& os, const Table& t, Format f, const json& meta) {
  if (f == Format::Json) {
    json doc = meta;
    json rows = json::array();
    for (const auto& r : t.rows) {
      json obj = json::object();
      for (std::size_t c = 0; c < t.columns.size(); ++c) obj[t.columns[c]] = r[c];
      rows.push_back(obj);
    }
    doc["rows"] = rows;
    os << doc.dump(2) << "\n";
    return;
  }
  for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << t.columns[c];
  os << "\n";
  for (const auto& r : t.rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      os << (c ? "," : "");
      if (r[c].is_number_float()) {
        os << format_double(r[c].get<double>());
      } else if (r[c].is_string()) {
        os << r[c].get<std::string>();
      } else {
        os << r[c].dump();
      }
    }
    os << "\n";
  }
}

// Sends output either to the stream or to --output.
void emit(const RunConfig& cfg, std::ostream& out, const Table& t, const json& meta) {
  if (cfg.output_path) {
    std::ofstream f(*cfg.output_path);
    if (!f) throw ConfigError("--output", "cannot write '" + *cfg.output_path + "'");
    write_table(f, t, cfg.format, meta);
  } else {
    write_table(out, t, cfg.format, meta);
  }
}

int cmd_mmi(const RunConfig& cfg, const SpectrumSource& src, std::ostream& out) {
  if (!cfg.budget) throw ConfigError("--F", "a budget is required");
  const MmiResult r = mmi_evaluate(cfg.arch, src.spectrum, ChannelParams{cfg.sigma2, *cfg.budget});
  Table t{{"F", "mmi", "units", "regime_K", "active_components", "n_tilde"}, {}};
  t.rows.push_back({json(*cfg.budget), json(convert(r.nats, cfg.units)), json(units_name(cfg.units)),
                    json(r.regime_K), json(r.active_components), json(r.n_tilde)});
  emit(cfg, out, t, {{"command", "mmi"}, {"activation", to_string(cfg.arch.activation)}});
  return 0;
}

void write_gnuplot(const RunConfig& cfg) {
  if (!cfg.gnuplot_path) return;
  if (!cfg.output_path || cfg.format != Format::Csv) {
    throw ConfigError("--gnuplot", "needs --output PATH with --out csv");
  }
  std::ofstream f(*cfg.gnuplot_path);
  if (!f) throw ConfigError("--gnuplot", "cannot write '" + *cfg.gnuplot_path + "'");
  f << "set datafile separator ','\n"
    << "set key autotitle columnhead\n"
    << "set xlabel 'F'\n"
    << "set ylabel 'MMI (" << units_name(cfg.units) << ")'\n"
    << "plot '" << *cfg.output_path << "' using 1:2 with lines\n";
}

int cmd_curve(const RunConfig& cfg, const SpectrumSource& src, std::ostream& out) {
  if (cfg.grid.empty()) throw ConfigError("--F-grid", "a budget grid is required");
  const auto curve = mmi_curve(cfg.arch, src.spectrum, cfg.sigma2, cfg.grid);
  Table t{{"F", "mmi", "regime_K", "active_components"}, {}};
  for (const auto& [f, r] : curve) {
    t.rows.push_back({json(f), json(convert(r.nats, cfg.units)), json(r.regime_K), json(r.active_components)});
  }
  emit(cfg, out, t, {{"command", "curve"}, {"units", units_name(cfg.units)}});
  write_gnuplot(cfg);
  return 0;
}

int cmd_breakpoints(const RunConfig& cfg, const SpectrumSource& src, std::ostream& out) {
  const Breakpoints bp = breakpoints(src.spectrum, cfg.sigma2, cfg.arch.n_tilde());
  Table t{{"k", "rho"}, {}};
  for (std::size_t k = 1; k <= bp.n_tilde(); ++k) t.rows.push_back({json(k), json(bp.at(k))});
  emit(cfg, out, t, {{"command", "breakpoints"}});
  return 0;
}

struct Check {
  std::string name;
  double value;
  double reference;
  double tolerance;
  bool pass;
  json detail;
};

int cmd_verify(const RunConfig& cfg, const SpectrumSource& src, std::ostream& out) {
  const auto* fc = std::get_if<FullyConnected>(&cfg.arch.family);
  if (!fc) throw ConfigError("--arch", "verify runs on fully connected architectures (fc:N0,N1)");
  if (!cfg.budget) throw ConfigError("--F", "a budget is required");
  const double budget = *cfg.budget;
  const double sigma2 = cfg.sigma2;
  const std::size_t n1 = fc->n1;
  const CovarianceMatrix cov = src.cov ? *src.cov : CovarianceMatrix::diagonal(src.spectrum);
  const Eigensystem eig = eigvals_from_covariance(cov);
  const MmiResult closed_result = mmi_fc(ChannelParams{sigma2, budget}, eig.spectrum, fc->n0, n1);
  const double closed = closed_result.nats + cfg.inject_offset;

  std::vector<Check> checks;

  {
    const double achieved = exact_linear_mi(build_optimal_weights(budget, eig, sigma2, n1), cov, sigma2);
    checks.push_back({"achievability", achieved, closed, 1e-9, std::abs(achieved - closed) <= 1e-9, nullptr});
  }
  {
    OptimizerConfig oc;
    oc.seed = cfg.seed;
    oc.restarts = cfg.restarts;
    const OptimizeResult opt = maximize_mi(budget, cov, sigma2, n1, oc);
    const bool ok = opt.achieved_nats <= closed + 1e-9 && closed - opt.achieved_nats <= 1e-4;
    checks.push_back({"optimizer_gap", opt.achieved_nats, closed, 1e-4, ok, {{"converged", opt.converged}}});
  }
  {
    double worst = 0.0;
    const Breakpoints& bp = closed_result.breakpoints;
    for (std::size_t k = 2; k <= bp.n_tilde(); ++k) {
      const double below = mmi_regime_formula(eig.spectrum, sigma2, bp.at(k), k - 1);
      const double above = mmi_regime_formula(eig.spectrum, sigma2, bp.at(k), k);
      worst = std::max(worst, std::abs(below - above));
    }
    checks.push_back({"breakpoint_agreement", worst, 0.0, 1e-10, worst <= 1e-10, nullptr});
  }
  const MCConfig mc{cfg.mc_samples, cfg.mc_samples, cfg.seed};
  {
    const ReluReport rep = verify_relu_theorem(budget, cov, sigma2, n1, {2.0, 4.0, 8.0}, mc);
    const auto& last = rep.rows.back();
    checks.push_back({"relu_large_bias", last.mi_estimate, closed, last.g_bound.value_or(1.0) + 3.0 * last.std_error,
                      rep.pass && std::abs(closed - last.mi_estimate) <= last.g_bound.value_or(1.0) + 3.0 * last.std_error,
                      rep.to_json()});
  }
  const WeightMatrix w_opt = build_optimal_weights(budget, eig, sigma2, n1);
  {
    const ReluModel model{w_opt, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n1)), sigma2};
    const OrderingReport rep = verify_entropy_ordering(model, cov, mc);
    checks.push_back({"entropy_ordering", rep.relu_entropy.value, rep.linear_entropy.value,
                      3.0 * rep.combined_std_error, rep.pass, rep.to_json()});
  }
  {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n1));
    const MCEstimate lin = estimate_mi(Channel::linear(w_opt, zero, sigma2), cov, mc);
    const MCEstimate bij = estimate_mi(Channel::bijective(w_opt, zero, sigma2, BijectiveMap::tanh()), cov, mc);
    const double tol = 3.0 * std::hypot(lin.std_error, bij.std_error);
    checks.push_back({"bijective_invariance", bij.value, lin.value, tol, std::abs(bij.value - lin.value) <= tol,
                      nullptr});
  }

  bool all = true;
  Table t{{"check", "value", "reference", "tolerance", "pass"}, {}};
  json details = json::object();
  for (const auto& c : checks) {
    all = all && c.pass;
    t.rows.push_back({json(c.name), json(c.value), json(c.reference), json(c.tolerance), json(c.pass)});
    if (!c.detail.is_null()) details[c.name] = c.detail;
  }
  json meta = {{"command", "verify"}, {"seed", cfg.seed}, {"pass", all}};
  if (cfg.format == Format::Json) meta["reports"] = details;
  emit(cfg, out, t, meta);
  return all ? 0 : 1;
}

void apply_figure1(RunConfig& cfg, const std::string& which) {
  if (which != "left" && which != "right") throw ConfigError("--figure1", "expected left or right");
  cfg.arch = ArchitectureSpec{FullyConnected{100, 50}, Activation::Linear};
  cfg.arch_text = "fc:100,50";
  cfg.spectrum_text = which == "left" ? "exp:0.1" : "harmonic";
  cfg.sigma2 = 1.0;
  const Spectrum s = which == "left" ? model_spectrum(ExpDecay{0.1}, 100) : model_spectrum(Harmonic{}, 100);
  // 400 points from 0 to past the last regime boundary.
  const double top = 1.2 * rho_k(s, 1.0, 50);
  cfg.grid.clear();
  for (int i = 0; i < 400; ++i) cfg.grid.push_back(top * static_cast<double>(i) / 399.0);
}

template <typename T>
std::optional<T> file_field(const json& doc, const char* key) {
  if (!doc.contains(key)) return std::nullopt;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config.") + key, e.what());
  }
}

}  // namespace

ArchitectureSpec parse_arch(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("--arch", "expected fc:N0,N1 | conv:N0,NB,Nf | mlp:N0,w1,...");
  const std::string kind = text.substr(0, colon);
  std::vector<std::size_t> dims;
  for (const auto& p : split(text.substr(colon + 1), ',')) dims.push_back(to_size(p, "--arch"));
  ArchitectureSpec arch;
  if (kind == "fc" && dims.size() == 2) {
    arch.family = FullyConnected{dims[0], dims[1]};
  } else if (kind == "conv" && dims.size() == 3) {
    arch.family = Conv{dims[0], dims[1], dims[2]};
  } else if (kind == "mlp" && dims.size() >= 2) {
    arch.family = MultiLayer{dims[0], std::vector<std::size_t>(dims.begin() + 1, dims.end())};
  } else {
    throw ConfigError("--arch", "cannot parse '" + text + "'");
  }
  try {
    arch.validate();
  } catch (const Error& e) {
    throw ConfigError("--arch", e.what());
  }
  return arch;
}

std::vector<double> parse_grid(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 3) throw ConfigError("--F-grid", "expected lo:hi:n");
  const double lo = to_double(parts[0], "--F-grid");
  const double hi = to_double(parts[1], "--F-grid");
  const std::size_t n = to_size(parts[2], "--F-grid");
  if (n == 0 || lo < 0.0 || hi < lo || (n == 1 && hi != lo)) {
    throw ConfigError("--F-grid", "need 0 <= lo <= hi and n >= 1 (n = 1 requires lo = hi)");
  }
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) {
    grid[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  grid.back() = hi;
  return grid;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Maximum mutual information of Gaussian-input network layers"};
  app.require_subcommand(1);

  std::optional<std::string> arch, spectrum, grid, units, format, figure1, config_path, output, gnuplot;
  std::optional<double> sigma2, budget, offset;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::optional<int> restarts;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--arch", arch, "fc:N0,N1 | conv:N0,NB,Nf | mlp:N0,w1,w2,...");
    sub->add_option("--spectrum", spectrum, "exp:RATE | harmonic | file:PATH | list:v1,v2,...");
    sub->add_option("--sigma2", sigma2, "noise variance");
    sub->add_option("--F", budget, "Frobenius budget, bound on Tr(W^T W)");
    sub->add_option("--F-grid", grid, "budget grid lo:hi:n");
    sub->add_option("--units", units, "nats | bits");
    sub->add_option("--out", format, "csv | json");
    sub->add_option("--seed", seed, "seed for every stochastic output");
    sub->add_option("--figure1", figure1, "left | right preset");
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--output", output, "write the table to PATH instead of stdout");
    sub->add_option("--gnuplot", gnuplot, "write a plotting script for the CSV at --output");
    sub->add_option("--mc-samples", samples, "Monte-Carlo inner/outer sample count for verify");
    sub->add_option("--restarts", restarts, "optimizer restarts for verify");
    sub->add_option("--inject-offset", offset, "add a constant to the closed form (fault injection)")
        ->group("");
  };
  CLI::App* sub_mmi = app.add_subcommand("mmi", "closed-form MMI at one budget");
  CLI::App* sub_curve = app.add_subcommand("curve", "MMI over a budget grid");
  CLI::App* sub_bp = app.add_subcommand("breakpoints", "regime boundaries rho_k");
  CLI::App* sub_verify = app.add_subcommand("verify", "run the verification checks");
  for (auto* s : {sub_mmi, sub_curve, sub_bp, sub_verify}) add_common(s);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    for (auto* s : {sub_mmi, sub_curve, sub_bp, sub_verify}) {
      if (s->parsed()) out << s->help();
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    const bool is_verify = sub_verify->parsed();
    json file_doc = json::object();
    if (config_path) {
      std::ifstream in(*config_path);
      if (!in) throw ConfigError("--config", "cannot open '" + *config_path + "'");
      try {
        file_doc = json::parse(in);
      } catch (const json::exception& e) {
        throw ConfigError("--config", e.what());
      }
      if (!file_doc.is_object()) throw ConfigError("--config", "expected a JSON object");
    }
    // flags > config file > defaults
    auto pick = [&](auto& flag, const char* key) {
      using T = typename std::decay_t<decltype(flag)>::value_type;
      if (!flag) flag = file_field<T>(file_doc, key);
    };
    pick(arch, "arch");
    pick(spectrum, "spectrum");
    pick(sigma2, "sigma2");
    pick(budget, "F");
    pick(grid, "F_grid");
    pick(units, "units");
    pick(format, "out");
    pick(seed, "seed");
    pick(figure1, "figure1");
    pick(output, "output");
    pick(gnuplot, "gnuplot");
    pick(samples, "mc_samples");
    pick(restarts, "restarts");

    RunConfig cfg;
    if (figure1) {
      apply_figure1(cfg, *figure1);
      cfg.figure1 = figure1;
    } else if (is_verify) {
      cfg.arch_text = "fc:4,3";
      cfg.spectrum_text = "exp:0.5";
      cfg.budget = 3.0;
    }
    if (arch) cfg.arch_text = *arch;
    if (spectrum) cfg.spectrum_text = *spectrum;
    if (cfg.arch_text.empty()) throw ConfigError("--arch", "an architecture is required");
    if (cfg.spectrum_text.empty()) throw ConfigError("--spectrum", "a spectrum source is required");
    cfg.arch = parse_arch(cfg.arch_text);
    if (sigma2) cfg.sigma2 = *sigma2;
    if (!(cfg.sigma2 > 0.0) || !std::isfinite(cfg.sigma2)) throw ConfigError("--sigma2", "must be positive");
    if (budget) cfg.budget = *budget;
    if (cfg.budget && !(*cfg.budget >= 0.0 && std::isfinite(*cfg.budget))) {
      throw ConfigError("--F", "must be a finite non-negative number");
    }
    if (grid) cfg.grid = parse_grid(*grid);
    if (units) {
      if (*units == "nats") cfg.units = Units::Nats;
      else if (*units == "bits") cfg.units = Units::Bits;
      else throw ConfigError("--units", "expected nats or bits");
    }
    if (format) {
      if (*format == "csv") cfg.format = Format::Csv;
      else if (*format == "json") cfg.format = Format::Json;
      else throw ConfigError("--out", "expected csv or json");
    }
    if (seed) cfg.seed = *seed;
    cfg.output_path = output;
    cfg.gnuplot_path = gnuplot;
    if (samples) {
      if (*samples < 100) throw ConfigError("--mc-samples", "must be >= 100");
      cfg.mc_samples = *samples;
    }
    if (restarts) {
      if (*restarts < 1) throw ConfigError("--restarts", "must be >= 1");
      cfg.restarts = *restarts;
    }
    if (offset) cfg.inject_offset = *offset;

    const SpectrumSource src = resolve_spectrum(cfg.spectrum_text, cfg.arch.spectrum_dim());
    if (sub_mmi->parsed()) return cmd_mmi(cfg, src, out);
    if (sub_curve->parsed()) return cmd_curve(cfg, src, out);
    if (sub_bp->parsed()) return cmd_breakpoints(cfg, src, out);
    return cmd_verify(cfg, src, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace mmicap::cli
