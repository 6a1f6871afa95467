#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "lensforge/lens/glass.hpp"

namespace lensforge {

// Object distances at or beyond this are treated as infinitely far away.
inline constexpr double kInfiniteDistance = 1e10;

struct Surface {
  double curvature = 0.0;        // 1/mm
  double thickness_after = 0.0;  // mm to the next surface (unused on the last one)
  Material material_after;
  double semi_diameter = std::numeric_limits<double>::infinity();
  bool is_stop = false;
};

// How the gap behind a surface is parameterized.
enum class GapKind { GlassThickness, AirSpacing, Zero, Image };

// Surface/gap structure implied by a design form string such as "GAGASAGA".
// G = glass element, A = air gap, S = aperture stop. Adjacent G's are
// cemented; a form must contain exactly one S and end with the image gap A.
struct FormLayout {
  struct Slot {
    bool is_stop = false;
    int glass_after = -1;  // element index of the medium behind the surface, -1 for air
    GapKind gap = GapKind::Zero;
  };
  std::string form;
  std::vector<Slot> surfaces;
  std::size_t stop_index = 0;
  std::size_t glass_count = 0;

  // Throws StructuralError on a malformed form string.
  static FormLayout parse(std::string_view form);
};

struct LensSystem {
  std::vector<Surface> surfaces;
  std::size_t stop_index = 0;
  double image_distance = 0.0;
  double entrance_pupil_diameter = 0.0;
  std::string design_form;

  // Checks the surface stack against design_form; throws StructuralError.
  void validate() const;

  double vertex_z(std::size_t i) const;
  double image_z() const;
  // First vertex to image plane.
  double total_track() const;
  std::size_t glass_count() const;
  // Glass of element k in surface order.
  const Glass& glass(std::size_t k) const;
  Glass& glass(std::size_t k);
};

// Sag of a spherical surface at radial height h (mm). NaN beyond the sphere.
double sphere_sag(double curvature, double h);

}  // namespace lensforge
