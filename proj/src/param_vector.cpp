#include "lensforge/lens/param_vector.hpp"

#include <algorithm>
#include <cmath>

#include "lensforge/error.hpp"

namespace lensforge {

std::shared_ptr<const ParamSchema> ParamSchema::build(const FormLayout& layout,
                                                      const ParameterRanges& ranges,
                                                      double entrance_pupil_diameter) {
  auto schema = std::make_shared<ParamSchema>();
  schema->layout = layout;
  schema->entrance_pupil_diameter = entrance_pupil_diameter;
  schema->fixed_glass.assign(layout.glass_count, std::nullopt);
  auto& e = schema->entries;
  for (std::size_t i = 0; i < layout.surfaces.size(); ++i)
    if (!layout.surfaces[i].is_stop) e.push_back({ParamRole::Curvature, i, ranges.curvature});
  for (std::size_t i = 0; i < layout.surfaces.size(); ++i) {
    switch (layout.surfaces[i].gap) {
      case GapKind::GlassThickness: e.push_back({ParamRole::Spacing, i, ranges.glass_thickness}); break;
      case GapKind::AirSpacing: e.push_back({ParamRole::Spacing, i, ranges.air_spacing}); break;
      case GapKind::Image: e.push_back({ParamRole::Spacing, i, ranges.image_distance}); break;
      case GapKind::Zero: break;
    }
  }
  for (std::size_t k = 0; k < layout.glass_count; ++k) {
    e.push_back({ParamRole::IndexD, k, ranges.index});
    e.push_back({ParamRole::AbbeD, k, ranges.abbe});
  }
  return schema;
}

std::vector<bool> ParamSchema::free_mask() const {
  std::vector<bool> mask(entries.size(), true);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if ((e.role == ParamRole::IndexD || e.role == ParamRole::AbbeD) && fixed_glass[e.index])
      mask[i] = false;
  }
  return mask;
}

std::shared_ptr<const ParamSchema> ParamSchema::with_fixed_glass(std::size_t element,
                                                                 Glass glass) const {
  if (element >= fixed_glass.size()) throw StructuralError("glass element index out of range");
  auto copy = std::make_shared<ParamSchema>(*this);
  copy->fixed_glass[element] = std::move(glass);
  return copy;
}

std::pair<std::size_t, std::size_t> ParamSchema::glass_coordinates(std::size_t element) const {
  std::size_t n = entries.size(), v = entries.size();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].index != element) continue;
    if (entries[i].role == ParamRole::IndexD) n = i;
    if (entries[i].role == ParamRole::AbbeD) v = i;
  }
  if (n == entries.size() || v == entries.size())
    throw StructuralError("glass element index out of range");
  return {n, v};
}

double physical_value(const ParamEntry& e, double normalized) {
  const double v = std::clamp(normalized, 0.0, 1.0);
  return e.range.lo + v * (e.range.hi - e.range.lo);
}

NormalizeResult normalize(const LensSystem& lens, std::shared_ptr<const ParamSchema> schema) {
  if (!schema) throw StructuralError("normalize: missing schema");
  const auto& layout = schema->layout;
  if (lens.design_form != layout.form || lens.surfaces.size() != layout.surfaces.size())
    throw StructuralError("normalize: lens form '" + lens.design_form +
                          "' does not match schema form '" + layout.form + "'");
  NormalizeResult out;
  out.x.schema = schema;
  out.x.values.resize(schema->entries.size());
  for (std::size_t i = 0; i < schema->entries.size(); ++i) {
    const auto& e = schema->entries[i];
    double p = 0.0;
    switch (e.role) {
      case ParamRole::Curvature: p = lens.surfaces[e.index].curvature; break;
      case ParamRole::Spacing:
        p = layout.surfaces[e.index].gap == GapKind::Image ? lens.image_distance
                                                           : lens.surfaces[e.index].thickness_after;
        break;
      case ParamRole::IndexD: p = lens.glass(e.index).n_d; break;
      case ParamRole::AbbeD: p = lens.glass(e.index).v_d; break;
    }
    const double w = e.range.hi - e.range.lo;
    double v = w > 0.0 ? (p - e.range.lo) / w : 0.5;
    if (v < 0.0 || v > 1.0 || std::isnan(v)) {
      out.clamped.push_back(i);
      v = std::isnan(v) ? 0.5 : std::clamp(v, 0.0, 1.0);
    }
    out.x.values[i] = v;
  }
  return out;
}

LensSystem denormalize(const ParamSchema& schema, std::span<const double> values) {
  if (values.size() != schema.entries.size())
    throw StructuralError("denormalize: vector has " + std::to_string(values.size()) +
                          " values, schema expects " + std::to_string(schema.entries.size()));
  const auto& layout = schema.layout;
  LensSystem lens;
  lens.design_form = layout.form;
  lens.stop_index = layout.stop_index;
  lens.entrance_pupil_diameter = schema.entrance_pupil_diameter;
  lens.surfaces.resize(layout.surfaces.size());
  std::vector<Glass> glasses(layout.glass_count);
  for (std::size_t i = 0; i < schema.entries.size(); ++i) {
    const auto& e = schema.entries[i];
    const double p = physical_value(e, values[i]);
    switch (e.role) {
      case ParamRole::Curvature: lens.surfaces[e.index].curvature = p; break;
      case ParamRole::Spacing:
        if (layout.surfaces[e.index].gap == GapKind::Image)
          lens.image_distance = p;
        else
          lens.surfaces[e.index].thickness_after = p;
        break;
      case ParamRole::IndexD: glasses[e.index].n_d = p; break;
      case ParamRole::AbbeD: glasses[e.index].v_d = p; break;
    }
  }
  for (std::size_t k = 0; k < glasses.size(); ++k)
    if (schema.fixed_glass[k]) glasses[k] = *schema.fixed_glass[k];
  for (std::size_t i = 0; i < layout.surfaces.size(); ++i) {
    const auto& slot = layout.surfaces[i];
    auto& s = lens.surfaces[i];
    s.is_stop = slot.is_stop;
    s.material_after = slot.glass_after < 0 ? Material::air() : Material::of(glasses[slot.glass_after]);
  }
  return lens;
}

double total_track(const ParamSchema& schema, std::span<const double> values) {
  double ttl = 0.0;
  for (std::size_t i = 0; i < schema.entries.size(); ++i)
    if (schema.entries[i].role == ParamRole::Spacing) ttl += physical_value(schema.entries[i], values[i]);
  return ttl;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw StructuralError("distance between vectors of different length");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace lensforge
