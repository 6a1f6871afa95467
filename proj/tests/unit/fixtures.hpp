#pragma once

#include <cstdlib>
#include <string>

#include "lensforge/lens/lens_system.hpp"

namespace fixtures {

inline std::string data_path(const std::string& name) {
  const char* dir = std::getenv("LENSFORGE_DATA");
  return std::string(dir ? dir : "data") + "/" + name;
}

// Stop in front of a single glass element.
inline lensforge::LensSystem singlet(double c1, double c2, double t, double n, double image_distance = 50.0,
                                     double epd = 10.0) {
  using namespace lensforge;
  LensSystem l;
  l.design_form = "SGA";
  l.entrance_pupil_diameter = epd;
  l.image_distance = image_distance;
  Surface stop;
  stop.is_stop = true;
  Surface s1;
  s1.curvature = c1;
  s1.thickness_after = t;
  s1.material_after = Material::of({n, 60.0, "test"});
  Surface s2;
  s2.curvature = c2;
  l.surfaces = {stop, s1, s2};
  l.stop_index = 0;
  return l;
}

// Air-spaced crown/flint pair behind the stop, focused near paraxial focus.
inline lensforge::LensSystem doublet() {
  using namespace lensforge;
  LensSystem l;
  l.design_form = "SGAGA";
  l.entrance_pupil_diameter = 8.0;
  l.image_distance = 48.5;
  Surface stop;
  stop.is_stop = true;
  Surface a, b, c, d;
  a.curvature = 0.045;
  a.thickness_after = 4.0;
  a.material_after = Material::of({1.5168, 64.2, "crown"});
  b.curvature = -0.02;
  b.thickness_after = 1.5;
  c.curvature = -0.03;
  c.thickness_after = 2.0;
  c.material_after = Material::of({1.6727, 32.2, "flint"});
  d.curvature = -0.005;
  l.surfaces = {stop, a, b, c, d};
  return l;
}

}  // namespace fixtures
