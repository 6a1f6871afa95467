#include "lensforge/optifusion/rng.hpp"

#include <cmath>
#include <numbers>

namespace lensforge {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Stream::Stream(std::uint64_t seed, std::uint64_t generation, std::uint64_t index,
               StreamPhase phase) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ generation);
  h = mix64(h ^ index);
  h = mix64(h ^ static_cast<std::uint64_t>(phase));
  engine_.seed(h);
}

std::uint64_t Stream::below(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t v;
  do v = engine_();
  while (v >= limit);
  return v % n;
}

double Stream::normal() {
  double u1;
  do u1 = uniform();
  while (u1 <= 0.0);
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace lensforge
