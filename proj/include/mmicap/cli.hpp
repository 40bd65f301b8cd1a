#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mmicap/mmi.hpp"
#include "mmicap/spectrum.hpp"

namespace mmicap::cli {

enum class Units { Nats, Bits };
enum class Format { Csv, Json };

/// Fully resolved settings for one invocation.
struct RunConfig {
  ArchitectureSpec arch;
  std::string arch_text;
  std::string spectrum_text;
  double sigma2 = 1.0;
  std::optional<double> budget;
  std::vector<double> grid;
  Units units = Units::Nats;
  Format format = Format::Csv;
  std::uint64_t seed = 0;
  std::optional<std::string> figure1;
  std::optional<std::string> output_path;
  std::optional<std::string> gnuplot_path;
  // verify settings
  std::size_t mc_samples = 4000;
  int restarts = 5;
  double inject_offset = 0.0;
};

/// "fc:N0,N1" | "conv:N0,NB,Nf" | "mlp:w1,w2,..." (mlp input width = w1).
ArchitectureSpec parse_arch(const std::string& text);

/// "lo:hi:n", n >= 1 points inclusive of both ends.
std::vector<double> parse_grid(const std::string& text);

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

/// Exit codes: 0 success, 1 verification failure, 2 usage or config error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mmicap::cli
