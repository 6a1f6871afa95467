#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "lensforge/lens/design_spec.hpp"
#include "lensforge/lens/glass.hpp"
#include "lensforge/raytrace/trace.hpp"

namespace lensforge {

// max(q_min - q, 0) + max(q - q_max, 0)
double violation(double q, const Range& bounds);

struct ConstraintInput {
  Quantity quantity = Quantity::Efl;
  double value = 0.0;
  Range bounds;
  double weight = 0.0;
};

struct ConstraintTerm {
  Quantity quantity = Quantity::Efl;
  double value = 0.0;
  Range bounds;
  double violation = 0.0;
  double penalty = 0.0;  // weighted, before the 1/n_i average
};

struct ConstraintReport {
  std::vector<ConstraintTerm> terms;
  double total = 0.0;
};

// (1/n_i) Σ α_i · violation_i
ConstraintReport linear_constraint_loss(std::span<const ConstraintInput> inputs);
// (1/n_i) Σ α_i · violation_i²
ConstraintReport quadratic_constraint_loss(std::span<const ConstraintInput> inputs);

// (1/p) Σ over glasses of the weighted squared distance to the nearest catalog
// entry. Throws ConfigError for an empty catalog.
double glass_variable_loss(std::span<const Glass> glasses, const GlassCatalog& catalog);

// RMS radius of one (field, wavelength) cell about (chief x, 0). nullopt when
// the cell has no valid ray.
std::optional<double> spot_rms(const TraceResult& cell);

// Mean spot RMS over all cells; nullopt if any cell is empty.
std::optional<double> spot_loss(std::span<const TraceResult> cells);

// chief_x[field][wavelength]; mean over fields of the chief-x spread.
double lateral_chromatic_loss(const std::vector<std::vector<double>>& chief_x);

}  // namespace lensforge
