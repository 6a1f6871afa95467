#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "lensforge/lens/design_spec.hpp"
#include "lensforge/lens/glass.hpp"
#include "lensforge/lens/lens_system.hpp"

namespace lensforge {

enum class ParamRole { Curvature, Spacing, IndexD, AbbeD };

struct ParamEntry {
  ParamRole role = ParamRole::Curvature;
  std::size_t index = 0;  // surface index (curvature, spacing) or glass element index
  Range range;
};

// Mapping between a normalized vector in [0,1]^n and a LensSystem.
//
// Variables are the curvatures of all powered surfaces, every glass or air
// center spacing, the image distance, and (n_d, v_d) per glass element.
// Glasses pinned via `fixed_glass` ignore their vector coordinates.
struct ParamSchema {
  FormLayout layout;
  double entrance_pupil_diameter = 0.0;
  std::vector<ParamEntry> entries;
  std::vector<std::optional<Glass>> fixed_glass;  // one slot per glass element

  static std::shared_ptr<const ParamSchema> build(const FormLayout& layout,
                                                  const ParameterRanges& ranges,
                                                  double entrance_pupil_diameter);

  std::size_t size() const { return entries.size(); }
  // Coordinates that an optimizer may move (pinned glass coordinates excluded).
  std::vector<bool> free_mask() const;
  std::shared_ptr<const ParamSchema> with_fixed_glass(std::size_t element, Glass glass) const;
  // Positions of the (n_d, v_d) coordinates of a glass element.
  std::pair<std::size_t, std::size_t> glass_coordinates(std::size_t element) const;
};

struct ParamVector {
  std::vector<double> values;
  std::shared_ptr<const ParamSchema> schema;
};

struct NormalizeResult {
  ParamVector x;
  std::vector<std::size_t> clamped;  // coordinates that fell outside their range
};

// Throws StructuralError when the lens does not match the schema's form.
NormalizeResult normalize(const LensSystem& lens, std::shared_ptr<const ParamSchema> schema);

// Values are clamped to [0,1] before mapping. Semi-diameters are left
// unbounded; they are assigned from traced rays.
LensSystem denormalize(const ParamSchema& schema, std::span<const double> values);
inline LensSystem denormalize(const ParamVector& x) { return denormalize(*x.schema, x.values); }

// Physical value of one coordinate.
double physical_value(const ParamEntry& e, double normalized);
// Physical TTL implied by a vector, without building the lens.
double total_track(const ParamSchema& schema, std::span<const double> values);

double euclidean_distance(std::span<const double> a, std::span<const double> b);

}  // namespace lensforge
