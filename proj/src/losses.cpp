#include "lensforge/merit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lensforge/error.hpp"

namespace lensforge {

double violation(double q, const Range& bounds) {
  return std::max(bounds.lo - q, 0.0) + std::max(q - bounds.hi, 0.0);
}

namespace {

ConstraintReport constraint_loss(std::span<const ConstraintInput> inputs, bool quadratic) {
  ConstraintReport report;
  report.terms.reserve(inputs.size());
  double sum = 0.0;
  for (const auto& in : inputs) {
    ConstraintTerm t{in.quantity, in.value, in.bounds, violation(in.value, in.bounds), 0.0};
    if (std::isnan(in.value)) t.violation = std::numeric_limits<double>::infinity();
    t.penalty = in.weight * (quadratic ? t.violation * t.violation : t.violation);
    sum += t.penalty;
    report.terms.push_back(t);
  }
  report.total = inputs.empty() ? 0.0 : sum / static_cast<double>(inputs.size());
  return report;
}

}  // namespace

ConstraintReport linear_constraint_loss(std::span<const ConstraintInput> inputs) {
  return constraint_loss(inputs, false);
}

ConstraintReport quadratic_constraint_loss(std::span<const ConstraintInput> inputs) {
  return constraint_loss(inputs, true);
}

double glass_variable_loss(std::span<const Glass> glasses, const GlassCatalog& catalog) {
  if (catalog.entries.empty()) throw ConfigError("glass catalog is empty");
  if (glasses.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& g : glasses) sum += catalog.nearest(g.n_d, g.v_d).distance;
  return sum / static_cast<double>(glasses.size());
}

std::optional<double> spot_rms(const TraceResult& cell) {
  if (!cell.chief_hit.valid) return std::nullopt;
  const double xc = cell.chief_hit.x;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& h : cell.image_hits) {
    if (!h.valid) continue;
    const double dx = h.x - xc;
    sum += dx * dx + h.y * h.y;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return std::sqrt(sum / static_cast<double>(n));
}

std::optional<double> spot_loss(std::span<const TraceResult> cells) {
  if (cells.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& c : cells) {
    const auto r = spot_rms(c);
    if (!r) return std::nullopt;
    sum += *r;
  }
  return sum / static_cast<double>(cells.size());
}

double lateral_chromatic_loss(const std::vector<std::vector<double>>& chief_x) {
  if (chief_x.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& per_wave : chief_x) {
    if (per_wave.empty()) continue;
    const auto [lo, hi] = std::minmax_element(per_wave.begin(), per_wave.end());
    sum += *hi - *lo;
  }
  return sum / static_cast<double>(chief_x.size());
}

}  // namespace lensforge
