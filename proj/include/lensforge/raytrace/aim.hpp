#pragma once

#include <array>
#include <span>
#include <vector>

#include "lensforge/lens/lens_system.hpp"
#include "lensforge/raytrace/ray.hpp"
#include "lensforge/raytrace/trace.hpp"

namespace lensforge {

// Normalized stop coordinates, |p| <= 1.
struct PupilPoint {
  double x = 0.0;
  double y = 0.0;
};

// Center plus `rings` concentric rings of 6k points: 1 + 3 rings (rings + 1) rays.
std::vector<PupilPoint> hexapolar_grid(int rings);

struct AimOptions {
  int max_iterations = 20;
  double tolerance = 1e-10;  // mm at the stop
};

// Rays start on the first-vertex plane (z = 0); grid order is preserved.
struct AimedBundle {
  Ray chief;
  std::vector<Ray> rays;
  // Final secant estimate of d(stop)/d(launch) per ray, row-major.
  std::vector<std::array<double, 4>> jacobians;
};

// Object point for a field angle (degrees) at a distance (mm) in front of the
// first vertex. Fields lie along +x; the image of a positive field lands at +x.
Vec3 object_point(double field_deg, double object_distance);

// Launch ray through (px, py) on the first-vertex plane from the object point.
Ray launch_ray(const Vec3& object, double px, double py, double wavelength);

// Aims rays so they fill the physical stop.
//
// The chief ray is driven to the stop center with Newton steps on a
// finite-difference Jacobian; every grid ray then solves for its target on
// the stop (grid point times stop_radius) with Broyden secant updates
// seeded by the chief Jacobian. Grid rays that cannot be aimed come back
// invalid. Throws FieldUnreachableError when the chief ray cannot be aimed.
// `hint`, when given, is a bundle aimed on the same grid under nearby
// conditions (another wavelength, say); its launch points seed the solves.
AimedBundle aim_rays(const PreparedLens& lens, double stop_radius, double field_deg,
                     double object_distance, std::span<const PupilPoint> grid,
                     const AimOptions& options = {}, const AimedBundle* hint = nullptr);

AimedBundle aim_rays(const LensSystem& lens, double field_deg, double wavelength,
                     double object_distance, std::span<const PupilPoint> grid,
                     const AimOptions& options = {});

}  // namespace lensforge
