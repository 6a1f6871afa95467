#pragma once

#include <cstdint>

#include "lensforge/imaging/image.hpp"
#include "lensforge/imaging/patch.hpp"
#include "lensforge/imaging/sensor.hpp"

namespace lensforge {

// sRGB transfer curve with a configurable exponent (2.4 is the standard).
double srgb_encode(double linear, double gamma);
double srgb_decode(double encoded, double gamma);
double srgb_encode_slope(double linear, double gamma);
double srgb_decode_slope(double encoded, double gamma);

// Camera-linear RGB -> display sRGB: white balance, CCM, clamp to [0,1], gamma.
Image isp_forward(const Image& raw, const SensorModel& sensor);
// Exact inverse of isp_forward on its unclamped range.
Image isp_inverse(const Image& srgb, const SensorModel& sensor);
// Vector-Jacobian products of the two maps at the given inputs.
Image isp_forward_adjoint(const Image& raw, const Image& grad_out, const SensorModel& sensor);
Image isp_inverse_adjoint(const Image& srgb, const Image& grad_out, const SensorModel& sensor);

// RGGB: R at (even row, even col), B at (odd, odd), G elsewhere.
inline int bayer_channel(int y, int x) { return (y & 1) == (x & 1) ? ((y & 1) ? 2 : 0) : 1; }

Image mosaic(const Image& rgb);
Image mosaic_adjoint(const Image& grad_mosaic);

// Bilinear demosaic. R and B interpolate along their lattices (linear
// extrapolation at the border); G averages its four neighbors, falling back
// to its row lattice on the border. Exact on affine images.
// Needs width, height >= 4.
Image demosaic(const Image& bayer);
Image demosaic_adjoint(const Image& grad_rgb);

// Gaussian read + shot noise on a mosaic: variance = σ² + gain · max(v, 0).
void add_sensor_noise(Image& bayer, const SensorModel& sensor, std::uint64_t seed);

struct DegradeOptions {
  bool noise = false;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

// Raw-domain part of the chain: patch convolution, mosaic, optional noise,
// demosaic. Linear in `raw` when noise is off.
Image degrade_raw(const Image& raw, const PatchLayout& layout,
                  const std::vector<std::array<std::vector<double>, 3>>& kernels, int t,
                  const SensorModel& sensor, const DegradeOptions& opts);

std::vector<std::array<std::vector<double>, 3>> layout_kernels(const PsfGrid& grid, const PatchLayout& layout);

// Full chain on a display-referred image. Throws StructuralError unless
// the image matches the layout.
Image degrade(const Image& srgb, const PsfGrid& grid, const PatchLayout& layout, const SensorModel& sensor,
              const DegradeOptions& opts);

}  // namespace lensforge
