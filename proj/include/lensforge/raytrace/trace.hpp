#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lensforge/lens/lens_system.hpp"
#include "lensforge/raytrace/ray.hpp"

namespace lensforge {

struct IntersectOptions {
  int max_iterations = 50;
  double tolerance = 1e-10;  // mm, residual of the sag equation
  bool clip = true;          // invalidate rays above the semi-diameter
};

// Advances a ray to a spherical surface whose vertex sits at vertex_z using
// Newton iteration on the ray parameter. Misses, non-convergence and
// clipping invalidate the ray instead of throwing.
Ray intersect_surface(const Ray& ray, const Surface& surface, double vertex_z,
                      const IntersectOptions& options = {});

// Unit normal of the surface at a point on it, oriented along +z.
Vec3 surface_normal(const Surface& surface, double vertex_z, const Vec3& point);

// Vector Snell refraction. Total internal reflection invalidates the ray.
Ray refract(const Ray& ray, const Vec3& normal, double n1, double n2);

// Surface stack at one wavelength, flattened for repeated tracing.
struct PreparedLens {
  std::vector<double> vertex_z;
  std::vector<double> curvature;
  std::vector<double> semi_diameter;
  std::vector<double> index_after;
  double index_before = 1.0;
  double image_z = 0.0;
  std::size_t stop_index = 0;
  double wavelength = 587.6;

  static PreparedLens make(const LensSystem& lens, double wavelength_nm);
};

struct TraceStatus {
  bool clip = true;
  // Optional per-surface running maxima of |ray height|.
  std::span<double> max_heights{};
};

// Traces through surfaces [0, last_surface] and leaves the ray on that surface.
Ray trace_to_surface(const PreparedLens& lens, Ray ray, std::size_t last_surface,
                     const TraceStatus& status = {});
// Traces through every surface and onto the image plane.
Ray trace_to_image(const PreparedLens& lens, Ray ray, const TraceStatus& status = {});

struct ImageHit {
  double x = 0.0;
  double y = 0.0;
  bool valid = false;
};

struct TraceResult {
  std::vector<ImageHit> image_hits;  // one per launched ray
  ImageHit chief_hit;
  std::vector<double> surface_heights;  // max |height| per surface over valid rays

  std::size_t valid_count() const;
};

TraceResult trace_system(const LensSystem& lens, std::span<const Ray> rays, const Ray& chief,
                         bool clip = true);

}  // namespace lensforge
