#include "lensforge/raytrace/trace.hpp"

#include <algorithm>
#include <cmath>

#include "lensforge/error.hpp"

namespace lensforge {

namespace {

Ray invalidated(Ray r) {
  r.valid = false;
  return r;
}

// Aimed edge rays land on the stop edge only to the aiming tolerance.
constexpr double kClipSlack = 1e-9;

bool clipped(double height, double semi_diameter) { return height > semi_diameter + kClipSlack; }

// Advances p along d to the surface with vertex at zv. Returns false on a
// miss, non-convergence, or clipping; p is then unspecified.
inline bool intersect_raw(Vec3& p, const Vec3& d, double c, double sd, double zv,
                          const IntersectOptions& o) {
  if (!(d.z > 0.0)) return false;
  double t = (zv - p.z) / d.z;
  if (c == 0.0) {
    p = p + d * t;
    p.z = zv;
  } else {
    // Seed Newton with the algebraic root nearest the vertex; the iteration
    // below then only has to confirm it.
    const Vec3 q{p.x, p.y, p.z - zv};
    const double b = d.z - c * q.dot(d);
    const double k = c * q.dot(q) - 2.0 * q.z;
    const double disc0 = b * b - c * k;
    if (disc0 >= 0.0 && b > 0.0) t = k / (b + std::sqrt(disc0));
    bool converged = false;
    for (int it = 0; it < o.max_iterations; ++it) {
      const double x = p.x + d.x * t;
      const double y = p.y + d.y * t;
      const double z = p.z + d.z * t;
      const double rho = x * x + y * y;
      const double disc = 1.0 - c * c * rho;
      if (disc <= 0.0) return false;
      const double root = std::sqrt(disc);
      const double f = z - zv - c * rho / (1.0 + root);
      if (std::abs(f) <= o.tolerance) {
        converged = true;
        break;
      }
      const double fp = d.z - c / root * (x * d.x + y * d.y);
      if (fp == 0.0) return false;
      t -= f / fp;
    }
    if (!converged) return false;
    p = p + d * t;
  }
  if (o.clip && clipped(std::sqrt(p.x * p.x + p.y * p.y), sd)) return false;
  return true;
}

inline Vec3 normal_raw(double c, double zv, const Vec3& q) {
  if (c == 0.0) return {0.0, 0.0, 1.0};
  // Points toward the center of curvature for c > 0, so +z at the vertex.
  return Vec3{-c * q.x, -c * q.y, 1.0 - c * (q.z - zv)}.normalized();
}

inline bool refract_raw(Vec3& d, Vec3 n, double n1, double n2) {
  double cosi = n.dot(d);
  if (cosi < 0.0) {
    n = -n;
    cosi = -cosi;
  }
  const double mu = n1 / n2;
  const double k = 1.0 - mu * mu * (1.0 - cosi * cosi);
  if (k < 0.0) return false;
  d = d * mu + n * (std::sqrt(k) - mu * cosi);
  return true;
}

Ray intersect_impl(const Ray& ray, double c, double sd, double vertex_z, const IntersectOptions& o) {
  if (!ray.valid) return ray;
  Ray out = ray;
  if (!intersect_raw(out.origin, out.direction, c, sd, vertex_z, o)) return invalidated(ray);
  return out;
}

}  // namespace

Ray intersect_surface(const Ray& ray, const Surface& surface, double vertex_z,
                      const IntersectOptions& options) {
  return intersect_impl(ray, surface.curvature, surface.semi_diameter, vertex_z, options);
}

Vec3 surface_normal(const Surface& surface, double vertex_z, const Vec3& point) {
  return normal_raw(surface.curvature, vertex_z, point);
}

Ray refract(const Ray& ray, const Vec3& normal, double n1, double n2) {
  if (!ray.valid) return ray;
  if (!(n1 > 0.0 && n2 > 0.0)) throw ConfigError("refract: indices must be positive");
  Ray out = ray;
  if (!refract_raw(out.direction, normal, n1, n2)) return invalidated(ray);
  return out;
}

PreparedLens PreparedLens::make(const LensSystem& lens, double wavelength_nm) {
  PreparedLens p;
  const std::size_t n = lens.surfaces.size();
  p.vertex_z.resize(n);
  p.curvature.resize(n);
  p.semi_diameter.resize(n);
  p.index_after.resize(n);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = lens.surfaces[i];
    p.vertex_z[i] = z;
    p.curvature[i] = s.curvature;
    p.semi_diameter[i] = s.semi_diameter;
    p.index_after[i] = s.material_after.index(wavelength_nm);
    z += s.thickness_after;
  }
  p.image_z = p.vertex_z[n - 1] + lens.image_distance;
  p.stop_index = lens.stop_index;
  p.wavelength = wavelength_nm;
  return p;
}

Ray trace_to_surface(const PreparedLens& lens, Ray ray, std::size_t last_surface,
                     const TraceStatus& status) {
  if (!ray.valid) return ray;
  IntersectOptions opts;
  opts.clip = status.clip;
  const bool track = !status.max_heights.empty();
  double n1 = lens.index_before;
  Vec3 p = ray.origin, d = ray.direction;
  for (std::size_t i = 0; i <= last_surface; ++i) {
    const double c = lens.curvature[i];
    if (!intersect_raw(p, d, c, lens.semi_diameter[i], lens.vertex_z[i], opts)) {
      ray.valid = false;
      return ray;
    }
    if (track) {
      const double h = std::sqrt(p.x * p.x + p.y * p.y);
      status.max_heights[i] = std::max(status.max_heights[i], h);
    }
    const double n2 = lens.index_after[i];
    if (n1 != n2 && !refract_raw(d, normal_raw(c, lens.vertex_z[i], p), n1, n2)) {
      ray.origin = p;
      ray.valid = false;
      return ray;
    }
    n1 = n2;
  }
  ray.origin = p;
  ray.direction = d;
  return ray;
}

Ray trace_to_image(const PreparedLens& lens, Ray ray, const TraceStatus& status) {
  ray = trace_to_surface(lens, ray, lens.vertex_z.size() - 1, status);
  if (!ray.valid) return ray;
  if (!(ray.direction.z > 0.0)) return invalidated(ray);
  const double t = (lens.image_z - ray.origin.z) / ray.direction.z;
  ray.origin = ray.origin + ray.direction * t;
  ray.origin.z = lens.image_z;
  return ray;
}

std::size_t TraceResult::valid_count() const {
  return static_cast<std::size_t>(
      std::count_if(image_hits.begin(), image_hits.end(), [](const ImageHit& h) { return h.valid; }));
}

TraceResult trace_system(const LensSystem& lens, std::span<const Ray> rays, const Ray& chief,
                         bool clip) {
  const PreparedLens prepared = PreparedLens::make(lens, chief.wavelength);
  TraceResult out;
  out.surface_heights.assign(lens.surfaces.size(), 0.0);
  TraceStatus status{clip, out.surface_heights};
  out.image_hits.reserve(rays.size());
  for (const Ray& r : rays) {
    const PreparedLens* pl = &prepared;
    PreparedLens other;
    if (r.wavelength != chief.wavelength) {
      other = PreparedLens::make(lens, r.wavelength);
      pl = &other;
    }
    const Ray img = trace_to_image(*pl, r, status);
    out.image_hits.push_back({img.origin.x, img.origin.y, img.valid});
  }
  const Ray c = trace_to_image(prepared, chief, {clip, {}});
  out.chief_hit = {c.origin.x, c.origin.y, c.valid};
  return out;
}

}  // namespace lensforge
