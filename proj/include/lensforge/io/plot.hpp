#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lensforge/lens/lens_system.hpp"

namespace lensforge {

struct CrossSection {
  std::string svg;
  double scale = 0.0;  // px per mm
  std::size_t rays = 0;
  std::vector<std::string> warnings;
};

// Meridional section: one arc per refracting surface, a stop marker, the
// image plane, and a fan of traced rays per field. Surfaces without a
// semi-diameter get one from the traced fan. A lens that cannot be traced
// is drawn without rays and a warning.
CrossSection cross_section_svg(const LensSystem& lens, std::span<const double> fields_deg,
                               double wavelength = 587.6);

struct SpotDiagram {
  std::string svg;
  std::vector<std::size_t> points_per_field;
  std::vector<std::string> warnings;
};

// One panel per field; one mark per valid traced ray, all wavelengths
// overlaid, each relative to its own chief ray.
SpotDiagram spot_diagram_svg(const LensSystem& lens, std::span<const double> fields_deg,
                             std::span<const double> wavelengths, double object_distance, int pupil_rings);

}  // namespace lensforge
