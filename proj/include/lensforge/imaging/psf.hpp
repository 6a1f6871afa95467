#pragma once

#include <array>
#include <span>
#include <vector>

#include "lensforge/imaging/sensor.hpp"
#include "lensforge/lens/lens_system.hpp"
#include "lensforge/raytrace/trace.hpp"

namespace lensforge {

// t x t intensity map, row-major; rows follow image y, columns image x.
struct Psf {
  int size = 0;
  std::vector<double> data;
  double chief_x = 0.0;  // mm, image plane
  double chief_y = 0.0;

  double at(int row, int col) const { return data[static_cast<std::size_t>(row) * size + col]; }
  double sum() const;
};

// Splats exp(-d²/2σ²) per hit around (center_x, center_y) onto a t x t grid
// of the given pitch, then normalizes to unit sum. Throws UnphysicalError
// when no hit is valid.
Psf splat_psf(std::span<const ImageHit> hits, double center_x, double center_y, int t, double pitch_mm,
              double sigma_mm);

// Aim, trace (unclipped) and splat one (field, wavelength, depth).
Psf compute_psf(const LensSystem& lens, double field_deg, double wavelength, double depth,
                const SensorModel& sensor);

// Shifts a map by (dx, dy) pixels with bilinear resampling; mass that leaves
// the support is dropped.
std::vector<double> shift_map(std::span<const double> map, int t, double dx, double dy);

struct ChannelPsf {
  std::vector<double> data;  // unit sum
  double anchor_x = 0.0;     // mm, G-channel reference
  double offset_px = 0.0;    // channel chief centroid minus anchor, in pixels
};

// Weighted sum of per-wavelength maps into three channel PSFs.
// `per_channel[c][k]` is the PSF at the k-th wavelength of channel c. Each
// map is shifted from its own chief-ray position into the frame of the G
// anchor (weighted mean of G chief positions) first, so R and B keep their
// real lateral offset.
std::array<ChannelPsf, 3> rgb_psf(const std::array<std::vector<Psf>, 3>& per_channel,
                                  const SensorModel& sensor);

// Channel PSFs for a set of sampled fields at one depth.
struct PsfGrid {
  int size = 0;
  double depth = 0.0;
  std::vector<double> fields_deg;
  std::vector<double> radius_px;  // G anchor distance from the axis, pixels
  std::vector<std::array<ChannelPsf, 3>> psf;  // [field][channel]

  std::size_t value_count() const { return psf.size() * 3 * static_cast<std::size_t>(size) * size; }
  // Flattened view [field][channel][row][col], used as F in gradient code.
  std::vector<double> flatten() const;
  void assign(std::span<const double> values);
};

// `fields` uniformly spaced field angles from 0 to hfov.
std::vector<double> uniform_fields(double hfov_deg, int fields);

PsfGrid build_psf_grid(const LensSystem& lens, std::span<const double> fields_deg, double depth,
                       const SensorModel& sensor, std::size_t jobs = 1);

}  // namespace lensforge
