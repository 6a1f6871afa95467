#include "lensforge/raytrace/paraxial.hpp"

#include <cmath>
#include <numbers>

#include "lensforge/error.hpp"
#include "lensforge/raytrace/aim.hpp"
#include "lensforge/raytrace/trace.hpp"

namespace lensforge {

namespace {

constexpr double kDegeneratePower = 1e-12;

std::size_t last_powered_surface(const LensSystem& lens) {
  for (std::size_t i = lens.surfaces.size(); i-- > 0;)
    if (!lens.surfaces[i].is_stop) return i;
  return lens.surfaces.size() - 1;
}

double axial_slope_check(double u) {
  if (std::abs(u) < kDegeneratePower) throw DegeneratePowerError("system has zero paraxial power");
  return u;
}

// Height of a paraxial ray on the image plane, given its trace.
double height_at_image(const LensSystem& lens, const ParaxialRay& r) {
  return r.heights.back() + r.final_slope * lens.image_distance;
}

}  // namespace

ParaxialRay paraxial_trace(const LensSystem& lens, double wavelength, double y0, double u0) {
  ParaxialRay out;
  out.heights.reserve(lens.surfaces.size());
  double y = y0;
  double n = 1.0;
  double w = u0;  // n * u
  for (std::size_t i = 0; i < lens.surfaces.size(); ++i) {
    const auto& s = lens.surfaces[i];
    out.heights.push_back(y);
    const double n2 = s.material_after.index(wavelength);
    w -= y * s.curvature * (n2 - n);
    n = n2;
    if (i + 1 < lens.surfaces.size()) y += w / n * s.thickness_after;
  }
  out.final_slope = w / n;
  return out;
}

double stop_radius(const LensSystem& lens) {
  const double half = 0.5 * lens.entrance_pupil_diameter;
  if (lens.stop_index == 0) return half;
  const ParaxialRay r = paraxial_trace(lens, kLineD, half, 0.0);
  return std::abs(r.heights[lens.stop_index]);
}

double effective_focal_length(const LensSystem& lens, double wavelength) {
  const ParaxialRay r = paraxial_trace(lens, wavelength, 1.0, 0.0);
  return -1.0 / axial_slope_check(r.final_slope);
}

double back_focal_length(const LensSystem& lens, double wavelength) {
  const ParaxialRay r = paraxial_trace(lens, wavelength, 1.0, 0.0);
  const double u = axial_slope_check(r.final_slope);
  const std::size_t k = last_powered_surface(lens);
  // Any flat air surface after k leaves the slope unchanged.
  return -r.heights[k] / u;
}

double paraxial_image_height(const LensSystem& lens, double object_distance, double field_deg,
                             double wavelength) {
  const double d = std::min(object_distance, kInfiniteDistance);
  const double tan_field = std::tan(field_deg * std::numbers::pi / 180.0);
  // Chief ray through the stop center: combine a pure-slope ray and a
  // pure-height ray so the object-space line passes through the object point.
  const ParaxialRay a = paraxial_trace(lens, wavelength, 0.0, tan_field);
  const ParaxialRay b = paraxial_trace(lens, wavelength, 1.0, 1.0 / d);
  const std::size_t s = lens.stop_index;
  if (b.heights[s] == 0.0) throw DegeneratePowerError("stop is conjugate to the object");
  const double k = -a.heights[s] / b.heights[s];
  return height_at_image(lens, a) + k * height_at_image(lens, b);
}

ParaxialSummary paraxial_analysis(const LensSystem& lens, double object_distance,
                                  double max_field_deg) {
  ParaxialSummary out;
  out.efl = effective_focal_length(lens);
  out.bfl = back_focal_length(lens);
  out.ttl = lens.total_track();

  const double d = std::min(object_distance, kInfiniteDistance);
  const double tan_field = std::tan(max_field_deg * std::numbers::pi / 180.0);
  const std::size_t s = lens.stop_index;
  const double r_stop = stop_radius(lens);
  {
    const ParaxialRay unit = paraxial_trace(lens, kLineD, 1.0, 1.0 / d);
    const double k = r_stop / unit.heights[s];
    for (double h : unit.heights) out.marginal_heights.push_back(k * h);
  }
  {
    const ParaxialRay a = paraxial_trace(lens, kLineD, 0.0, tan_field);
    const ParaxialRay b = paraxial_trace(lens, kLineD, 1.0, 1.0 / d);
    const double k = -a.heights[s] / b.heights[s];
    for (std::size_t i = 0; i < a.heights.size(); ++i)
      out.chief_heights.push_back(a.heights[i] + k * b.heights[i]);
  }

  const PreparedLens prepared = PreparedLens::make(lens, kLineD);
  const AimedBundle bundle = aim_rays(prepared, r_stop, max_field_deg, object_distance, {});
  const Ray chief = trace_to_image(prepared, bundle.chief, {false, {}});
  if (!chief.valid) throw FieldUnreachableError("chief ray lost at max field");
  out.image_height = chief.origin.x;
  const double y_par = paraxial_image_height(lens, object_distance, max_field_deg);
  out.distortion = y_par != 0.0 ? 100.0 * (out.image_height - y_par) / y_par : 0.0;
  return out;
}

}  // namespace lensforge
