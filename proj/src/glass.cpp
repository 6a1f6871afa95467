#include "lensforge/lens/glass.hpp"

#include <cmath>
#include <limits>

#include "lensforge/error.hpp"

namespace lensforge {

namespace {
double inv_sq(double wavelength_nm) { return 1.0 / (wavelength_nm * wavelength_nm); }
}  // namespace

void Glass::validate() const {
  if (!(n_d > 1.0)) throw ConfigError("glass '" + name + "': n_d must exceed 1");
  if (!(v_d > 0.0)) throw ConfigError("glass '" + name + "': v_d must be positive");
}

double Glass::coefficient_b() const {
  if (v_d == 0.0) throw DegenerateDispersionError("glass '" + name + "': v_d = 0");
  return (n_d - 1.0) / (v_d * (inv_sq(kLineF) - inv_sq(kLineC)));
}

double Glass::coefficient_a() const { return n_d - coefficient_b() * inv_sq(kLineD); }

double Glass::index(double wavelength_nm) const {
  if (!(wavelength_nm > 0.0)) throw ConfigError("wavelength must be positive");
  const double b = coefficient_b();
  // Written around n_d so the d-line query is exact.
  return n_d + b * (inv_sq(wavelength_nm) - inv_sq(kLineD));
}

void GlassCatalog::validate() const {
  if (entries.empty()) throw ConfigError("glass catalog is empty");
  for (const auto& g : entries) g.validate();
}

double GlassCatalog::distance(double n_d, double v_d, const Glass& entry) const {
  const double dn = n_d - entry.n_d;
  const double dv = v_d - entry.v_d;
  return alpha_n * dn * dn + alpha_v * dv * dv;
}

GlassCatalog::Match GlassCatalog::nearest(double n_d, double v_d) const {
  if (entries.empty()) throw ConfigError("glass catalog is empty");
  Match best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double d = distance(n_d, v_d, entries[i]);
    if (d < best.distance) best = {i, d};
  }
  return best;
}

}  // namespace lensforge
