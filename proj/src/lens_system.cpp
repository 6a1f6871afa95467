#include "lensforge/lens/lens_system.hpp"

#include <cmath>

#include "lensforge/error.hpp"

namespace lensforge {

FormLayout FormLayout::parse(std::string_view form) {
  FormLayout layout;
  layout.form = std::string(form);
  if (form.empty()) throw StructuralError("design form is empty");
  std::size_t stops = 0;
  int glass = 0;
  for (std::size_t i = 0; i < form.size(); ++i) {
    const char tok = form[i];
    const bool last = i + 1 == form.size();
    switch (tok) {
      case 'G': {
        layout.surfaces.push_back({false, glass, GapKind::GlassThickness});
        if (last || form[i + 1] != 'G') layout.surfaces.push_back({false, -1, GapKind::Zero});
        ++glass;
        break;
      }
      case 'S':
        ++stops;
        layout.stop_index = layout.surfaces.size();
        layout.surfaces.push_back({true, -1, GapKind::Zero});
        break;
      case 'A': {
        if (layout.surfaces.empty() || form[i - 1] == 'A')
          throw StructuralError("design form '" + layout.form + "': air gap at position " +
                                std::to_string(i) + " does not follow a surface");
        auto& prev = layout.surfaces.back();
        prev.gap = last ? GapKind::Image : GapKind::AirSpacing;
        break;
      }
      default:
        throw StructuralError("design form '" + layout.form + "': unknown token '" +
                              std::string(1, tok) + "'");
    }
  }
  if (stops != 1) throw StructuralError("design form '" + layout.form + "' needs exactly one stop");
  if (form.back() != 'A')
    throw StructuralError("design form '" + layout.form + "' must end with the image gap 'A'");
  if (glass == 0) throw StructuralError("design form '" + layout.form + "' has no glass element");
  layout.glass_count = static_cast<std::size_t>(glass);
  return layout;
}

void LensSystem::validate() const {
  const FormLayout layout = FormLayout::parse(design_form);
  if (surfaces.size() != layout.surfaces.size())
    throw StructuralError("lens has " + std::to_string(surfaces.size()) + " surfaces, form '" +
                          design_form + "' needs " + std::to_string(layout.surfaces.size()));
  if (stop_index != layout.stop_index)
    throw StructuralError("stop index does not match design form '" + design_form + "'");
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    const auto& s = surfaces[i];
    const auto& slot = layout.surfaces[i];
    if (s.is_stop != slot.is_stop)
      throw StructuralError("surface " + std::to_string(i) + ": stop flag does not match form");
    if (s.material_after.is_air != (slot.glass_after < 0))
      throw StructuralError("surface " + std::to_string(i) + ": glass/air does not match form");
    if (s.is_stop && s.curvature != 0.0)
      throw StructuralError("surface " + std::to_string(i) + ": stop must be flat");
    if (!(s.semi_diameter > 0.0))
      throw StructuralError("surface " + std::to_string(i) + ": semi-diameter must be positive");
    if (slot.gap == GapKind::GlassThickness || slot.gap == GapKind::AirSpacing) {
      if (!(s.thickness_after > 0.0))
        throw StructuralError("surface " + std::to_string(i) + ": thickness must be positive");
    }
    if (!s.material_after.is_air) s.material_after.glass.validate();
  }
  if (!(image_distance > 0.0)) throw StructuralError("image distance must be positive");
  if (!(entrance_pupil_diameter > 0.0))
    throw StructuralError("entrance pupil diameter must be positive");
}

double LensSystem::vertex_z(std::size_t i) const {
  double z = 0.0;
  for (std::size_t k = 0; k < i; ++k) z += surfaces[k].thickness_after;
  return z;
}

double LensSystem::image_z() const { return vertex_z(surfaces.size() - 1) + image_distance; }

double LensSystem::total_track() const { return image_z(); }

std::size_t LensSystem::glass_count() const {
  std::size_t n = 0;
  for (const auto& s : surfaces) n += s.material_after.is_air ? 0 : 1;
  return n;
}

const Glass& LensSystem::glass(std::size_t k) const {
  for (const auto& s : surfaces) {
    if (s.material_after.is_air) continue;
    if (k == 0) return s.material_after.glass;
    --k;
  }
  throw StructuralError("glass element index out of range");
}

Glass& LensSystem::glass(std::size_t k) {
  return const_cast<Glass&>(static_cast<const LensSystem&>(*this).glass(k));
}

double sphere_sag(double curvature, double h) {
  const double rho = h * h;
  const double disc = 1.0 - curvature * curvature * rho;
  if (disc < 0.0) return std::numeric_limits<double>::quiet_NaN();
  return curvature * rho / (1.0 + std::sqrt(disc));
}

}  // namespace lensforge
