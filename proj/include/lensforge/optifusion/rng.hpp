#pragma once

#include <cstdint>
#include <random>

namespace lensforge {

// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

enum class StreamPhase : std::uint64_t { Init = 1, Anneal = 2, Mutate = 3, Misc = 4 };

// Per-individual random stream keyed by (seed, generation, index, phase).
//
// Doubles are built from the top 53 bits by hand so draws do not depend on
// the standard library's distribution implementations.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t generation, std::uint64_t index, StreamPhase phase);
  explicit Stream(std::uint64_t raw_seed) : engine_(raw_seed) {}

  std::uint64_t next() { return engine_(); }
  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  bool coin() { return (engine_() >> 63) != 0; }
  // Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace lensforge
