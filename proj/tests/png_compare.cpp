// Prints the largest per-sample difference between two PNGs in units of the
// 16-bit LSB; exits 1 on a shape mismatch.
#include <cmath>
#include <cstdio>

#include "lensforge/imaging/image.hpp"

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: png_compare a.png b.png\n");
    return 2;
  }
  const auto a = lensforge::read_png(argv[1]);
  const auto b = lensforge::read_png(argv[2]);
  if (!a.same_shape(b)) {
    std::printf("shape mismatch\n");
    return 1;
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) worst = std::max(worst, std::abs(a.data[i] - b.data[i]) * 65535.0);
  std::printf("%.3f\n", worst);
  return 0;
}
