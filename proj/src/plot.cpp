#include "lensforge/io/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "lensforge/error.hpp"
#include "lensforge/raytrace/aim.hpp"
#include "lensforge/raytrace/paraxial.hpp"
#include "lensforge/raytrace/trace.hpp"

namespace lensforge {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

const char* kColors[] = {"#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

CrossSection cross_section_svg(const LensSystem& lens, std::span<const double> fields_deg, double wavelength) {
  CrossSection out;
  const std::size_t n = lens.surfaces.size();
  const double ttl = lens.total_track();
  LensSystem open = lens;
  for (auto& s : open.surfaces) s.semi_diameter = std::numeric_limits<double>::infinity();

  // Meridional fans: the grid points on the x axis.
  std::vector<PupilPoint> fan;
  for (const auto& p : hexapolar_grid(6))
    if (p.y == 0.0) fan.push_back(p);
  std::vector<std::vector<std::vector<Vec3>>> paths(fields_deg.size());
  std::vector<double> heights(n, 0.0);
  double stop_r = 0.0;
  try {
    stop_r = stop_radius(open);
    const PreparedLens prep = PreparedLens::make(open, wavelength);
    for (std::size_t f = 0; f < fields_deg.size(); ++f) {
      const AimedBundle b = aim_rays(prep, stop_r, fields_deg[f], kInfiniteDistance, fan);
      std::size_t lost = 0;
      for (const Ray& r : b.rays) {
        if (!r.valid) {
          ++lost;
          continue;
        }
        std::vector<Vec3> pts{r.origin};
        bool ok = true;
        for (std::size_t k = 0; k < n && ok; ++k) {
          const Ray at = trace_to_surface(prep, r, k, {false, {}});
          ok = at.valid;
          if (ok) {
            pts.push_back(at.origin);
            heights[k] = std::max(heights[k], std::abs(at.origin.x));
          }
        }
        const Ray img = trace_to_image(prep, r, {false, {}});
        if (!ok || !img.valid) {
          ++lost;
          continue;
        }
        pts.push_back(img.origin);
        paths[f].push_back(std::move(pts));
      }
      if (lost)
        out.warnings.push_back("field " + fmt(fields_deg[f]) + ": " + std::to_string(lost) + " of " +
                               std::to_string(b.rays.size()) + " rays lost");
    }
  } catch (const Error& e) {
    out.warnings.push_back(std::string("rays not drawn: ") + e.what());
    for (auto& p : paths) p.clear();
  }

  std::vector<double> sd(n);
  double max_h = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sd[k] = lens.surfaces[k].semi_diameter;
    if (!std::isfinite(sd[k])) sd[k] = heights[k] > 0.0 ? 1.02 * heights[k] : 0.5 * lens.entrance_pupil_diameter;
    if (lens.surfaces[k].is_stop && stop_r > 0.0 && !std::isfinite(lens.surfaces[k].semi_diameter)) sd[k] = stop_r;
    // a sphere cannot be drawn past its own radius
    if (lens.surfaces[k].curvature != 0.0) sd[k] = std::min(sd[k], 0.999 / std::abs(lens.surfaces[k].curvature));
    max_h = std::max(max_h, sd[k]);
  }
  for (const auto& f : paths)
    for (const auto& p : f)
      for (const auto& v : p) max_h = std::max(max_h, std::abs(v.x));

  const double margin = 40.0, width = 800.0;
  out.scale = width / std::max(ttl, 1e-9);
  const double height = 2 * margin + 2 * max_h * out.scale;
  const double cy = height / 2;
  auto X = [&](double z) { return margin + z * out.scale; };
  auto Y = [&](double h) { return cy - h * out.scale; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width + 2 * margin) << "\" height=\""
    << fmt(height) << "\" data-scale=\"" << fmt(out.scale) << "\" data-ttl=\"" << fmt(ttl) << "\">\n";
  s << "<line class=\"axis\" x1=\"" << fmt(X(0) - 20) << "\" y1=\"" << fmt(cy) << "\" x2=\"" << fmt(X(ttl) + 20)
    << "\" y2=\"" << fmt(cy) << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";

  for (std::size_t k = 0; k < n; ++k) {
    const double z0 = lens.vertex_z(k);
    const double c = lens.surfaces[k].curvature;
    if (lens.surfaces[k].is_stop) {
      s << "<g class=\"stop\" stroke=\"#000\" stroke-width=\"2\">"
        << "<line x1=\"" << fmt(X(z0)) << "\" y1=\"" << fmt(Y(sd[k])) << "\" x2=\"" << fmt(X(z0)) << "\" y2=\""
        << fmt(Y(sd[k] + 0.15 * max_h)) << "\"/>"
        << "<line x1=\"" << fmt(X(z0)) << "\" y1=\"" << fmt(Y(-sd[k])) << "\" x2=\"" << fmt(X(z0)) << "\" y2=\""
        << fmt(Y(-sd[k] - 0.15 * max_h)) << "\"/></g>\n";
      continue;
    }
    s << "<path class=\"surface\" fill=\"none\" stroke=\"#000\" d=\"";
    const int steps = 40;
    for (int i = 0; i <= steps; ++i) {
      const double h = -sd[k] + 2 * sd[k] * i / steps;
      s << (i ? " L " : "M ") << fmt(X(z0 + sphere_sag(c, h))) << " " << fmt(Y(h));
    }
    s << "\"/>\n";
  }
  // element rims
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (lens.surfaces[k].material_after.is_air || lens.surfaces[k + 1].is_stop) continue;
    const double h = std::max(sd[k], sd[k + 1]);
    for (int sign : {1, -1}) {
      const double za = lens.vertex_z(k) + sphere_sag(lens.surfaces[k].curvature, sign * sd[k]);
      const double zb = lens.vertex_z(k + 1) + sphere_sag(lens.surfaces[k + 1].curvature, sign * sd[k + 1]);
      s << "<path class=\"edge\" fill=\"none\" stroke=\"#000\" d=\"M " << fmt(X(za)) << " " << fmt(Y(sign * sd[k]))
        << " L " << fmt(X(za)) << " " << fmt(Y(sign * h)) << " L " << fmt(X(zb)) << " " << fmt(Y(sign * h)) << " L "
        << fmt(X(zb)) << " " << fmt(Y(sign * sd[k + 1])) << "\"/>\n";
    }
  }
  s << "<line class=\"image-plane\" x1=\"" << fmt(X(ttl)) << "\" y1=\"" << fmt(Y(max_h)) << "\" x2=\"" << fmt(X(ttl))
    << "\" y2=\"" << fmt(Y(-max_h)) << "\" stroke=\"#000\" data-z=\"" << fmt(ttl) << "\"/>\n";
  for (std::size_t f = 0; f < paths.size(); ++f)
    for (const auto& p : paths[f]) {
      s << "<polyline class=\"ray\" fill=\"none\" stroke=\"" << kColors[f % 6] << "\" stroke-width=\"0.6\" points=\"";
      for (std::size_t i = 0; i < p.size(); ++i) s << (i ? " " : "") << fmt(X(p[i].z)) << "," << fmt(Y(p[i].x));
      s << "\"/>\n";
      ++out.rays;
    }
  s << "</svg>\n";
  out.svg = s.str();
  return out;
}

SpotDiagram spot_diagram_svg(const LensSystem& lens, std::span<const double> fields_deg,
                             std::span<const double> wavelengths, double object_distance, int pupil_rings) {
  SpotDiagram out;
  const auto grid = hexapolar_grid(pupil_rings);
  struct Mark {
    double x, y;
    std::size_t w;
  };
  std::vector<std::vector<Mark>> marks(fields_deg.size());
  for (std::size_t f = 0; f < fields_deg.size(); ++f) {
    std::size_t count = 0;
    for (std::size_t w = 0; w < wavelengths.size(); ++w) {
      try {
        const AimedBundle b = aim_rays(lens, fields_deg[f], wavelengths[w], object_distance, grid);
        const TraceResult t = trace_system(lens, b.rays, b.chief);
        for (const auto& h : t.image_hits)
          if (h.valid) marks[f].push_back({h.x - t.chief_hit.x, h.y - t.chief_hit.y, w});
        count += t.valid_count();
      } catch (const Error& e) {
        out.warnings.push_back("field " + fmt(fields_deg[f]) + ", " + fmt(wavelengths[w]) + " nm: " + e.what());
      }
    }
    out.points_per_field.push_back(count);
  }
  const double panel = 220.0, gap = 20.0;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(fields_deg.size() * (panel + gap) + gap)
    << "\" height=\"" << fmt(panel + 2 * gap + 20) << "\">\n";
  for (std::size_t f = 0; f < fields_deg.size(); ++f) {
    double r = 1e-6;
    for (const auto& m : marks[f]) r = std::max({r, std::abs(m.x), std::abs(m.y)});
    const double k = 0.45 * panel / r;
    const double cx = gap + f * (panel + gap) + panel / 2, cy = gap + panel / 2;
    s << "<g class=\"panel\" data-field=\"" << fmt(fields_deg[f]) << "\" data-points=\"" << out.points_per_field[f]
      << "\">\n";
    s << "<rect x=\"" << fmt(cx - panel / 2) << "\" y=\"" << fmt(cy - panel / 2) << "\" width=\"" << fmt(panel)
      << "\" height=\"" << fmt(panel) << "\" fill=\"none\" stroke=\"#999\"/>\n";
    s << "<text x=\"" << fmt(cx - panel / 2) << "\" y=\"" << fmt(cy + panel / 2 + 15) << "\" font-size=\"11\">"
      << fmt(fields_deg[f]) << " deg, half-width " << fmt(r * 1000.0) << " um</text>\n";
    for (const auto& m : marks[f])
      s << "<circle class=\"spot\" cx=\"" << fmt(cx + m.x * k) << "\" cy=\"" << fmt(cy - m.y * k)
        << "\" r=\"1.2\" fill=\"" << kColors[m.w % 6] << "\"/>\n";
    s << "</g>\n";
  }
  s << "</svg>\n";
  out.svg = s.str();
  return out;
}

}  // namespace lensforge
