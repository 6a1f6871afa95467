#pragma once

#include <array>
#include <vector>

namespace lensforge {

struct SpectralSample {
  double wavelength = 0.0;  // nm
  double weight = 0.0;
};

// Simulated CMOS sensor and ISP settings.
//
// Channel order is R, G, B throughout. Noise parameters are in normalized
// raw units: variance = read_sigma² + shot_gain · signal.
struct SensorModel {
  int width = 1920;
  int height = 1280;
  double pixel_pitch_um = 12.394;
  std::array<std::vector<SpectralSample>, 3> channel_response = default_response();
  double read_sigma = 1e-3;
  double shot_gain = 1e-4;
  std::array<double, 3> wb_gains{2.0, 1.0, 1.8};
  std::array<double, 9> ccm{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major, camera RGB -> linear sRGB
  double gamma = 2.4;   // exponent of the sRGB transfer curve
  int psf_size = 33;    // t, odd
  int patch_size = 64;  // s
  int pupil_rings = 6;

  double pitch_mm() const { return pixel_pitch_um * 1e-3; }
  // Gaussian splat width: sqrt(dx² + dy²) / 3.
  double psf_sigma_mm() const;

  // Throws ConfigError naming the offending field.
  void validate() const;

  // Five samples per channel, Gaussian-shaped around 610 / 540 / 465 nm.
  static std::array<std::vector<SpectralSample>, 3> default_response();
};

}  // namespace lensforge
