#pragma once

#include <vector>

#include "lensforge/lens/lens_system.hpp"

namespace lensforge {

// y-nu trace of one paraxial ray launched at the first-vertex plane.
struct ParaxialRay {
  std::vector<double> heights;  // at each surface
  double final_slope = 0.0;     // after the last surface
};

ParaxialRay paraxial_trace(const LensSystem& lens, double wavelength, double y0, double u0);

// Stop radius that admits the entrance pupil diameter from an infinitely
// distant object (d-line paraxial trace).
double stop_radius(const LensSystem& lens);

struct ParaxialSummary {
  double efl = 0.0;
  double bfl = 0.0;  // last powered surface to the paraxial focus
  double ttl = 0.0;
  double image_height = 0.0;  // real chief ray at max field, d-line
  double distortion = 0.0;    // percent
  std::vector<double> marginal_heights;
  std::vector<double> chief_heights;
};

double effective_focal_length(const LensSystem& lens, double wavelength = kLineD);
double back_focal_length(const LensSystem& lens, double wavelength = kLineD);

// Throws DegeneratePowerError for an afocal system and FieldUnreachableError
// when the max-field chief ray cannot be aimed.
ParaxialSummary paraxial_analysis(const LensSystem& lens, double object_distance,
                                  double max_field_deg);

// Paraxial height of the chief ray (through the stop center) on the actual
// image plane, for a field along +x.
double paraxial_image_height(const LensSystem& lens, double object_distance, double field_deg,
                             double wavelength = kLineD);

}  // namespace lensforge
