#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace mmicap {

/// Worker count from MMI_THREADS (0 or unset = hardware concurrency).
unsigned worker_threads();

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunks write to
/// disjoint output slots, so results never depend on the schedule.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  unsigned threads = 0);

/// Counter-derived random stream: (seed, stream, index) identifies a
/// reproducible sequence independent of which thread consumes it.
class Substream {
 public:
  using result_type = std::uint64_t;

  Substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()();

  /// Uniform on (0, 1).
  double uniform();
  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mmicap
