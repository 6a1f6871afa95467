#include "lensforge/imaging/sensor.hpp"

#include <cmath>
#include <string>

#include "lensforge/error.hpp"

namespace lensforge {

namespace {

std::vector<SpectralSample> gaussian_band(double center, double width, double first, double step) {
  std::vector<SpectralSample> out;
  double total = 0.0;
  for (int k = 0; k < 5; ++k) {
    const double lambda = first + step * k;
    const double u = (lambda - center) / width;
    out.push_back({lambda, std::exp(-0.5 * u * u)});
    total += out.back().weight;
  }
  for (auto& s : out) s.weight /= total;
  return out;
}

}  // namespace

std::array<std::vector<SpectralSample>, 3> SensorModel::default_response() {
  return {gaussian_band(610.0, 30.0, 570.0, 22.5), gaussian_band(540.0, 30.0, 500.0, 20.0),
          gaussian_band(465.0, 25.0, 430.0, 17.5)};
}

double SensorModel::psf_sigma_mm() const {
  const double p = pitch_mm();
  return std::sqrt(p * p + p * p) / 3.0;
}

void SensorModel::validate() const {
  if (width <= 0 || height <= 0) throw ConfigError("sensor.width/height must be positive");
  if (!(pixel_pitch_um > 0.0)) throw ConfigError("sensor.pixel_pitch_um must be positive");
  if (psf_size <= 0 || psf_size % 2 == 0) throw ConfigError("sensor.psf_size must be a positive odd number");
  if (patch_size <= 0) throw ConfigError("sensor.patch_size must be positive");
  if (pupil_rings < 1) throw ConfigError("sensor.pupil_rings must be at least 1");
  if (read_sigma < 0.0 || shot_gain < 0.0) throw ConfigError("sensor noise parameters must be non-negative");
  static const char* names[3] = {"r", "g", "b"};
  for (int c = 0; c < 3; ++c) {
    const auto& band = channel_response[c];
    const std::string field = std::string("sensor.channel_response.") + names[c];
    if (band.empty()) throw ConfigError(field + " is empty");
    double total = 0.0;
    for (const auto& s : band) {
      if (!(s.wavelength > 0.0)) throw ConfigError(field + ": wavelengths must be positive");
      if (s.weight < 0.0) throw ConfigError(field + ": weights must be non-negative");
      total += s.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError(field + ": weights must sum to 1");
    if (!(wb_gains[c] > 0.0)) throw ConfigError("sensor.wb_gains must be positive");
  }
  const auto& m = ccm;
  const double det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
                     m[2] * (m[3] * m[7] - m[4] * m[6]);
  if (std::abs(det) < 1e-12) throw ConfigError("sensor.ccm must be invertible");
  if (!(gamma > 0.0)) throw ConfigError("sensor.gamma must be positive");
}

}  // namespace lensforge
