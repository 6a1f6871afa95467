#pragma once

#include <string>
#include <vector>

namespace lensforge {

// Fraunhofer lines used by the (n_d, v_d) glass description, in nm.
inline constexpr double kLineD = 587.6;
inline constexpr double kLineF = 486.1;
inline constexpr double kLineC = 656.3;

// A glass described by its d-line index and Abbe number.
//
// Dispersion follows n(λ) = A + B/λ², with A and B chosen so that
// n(587.6) = n_d and (n_d - 1)/(n(486.1) - n(656.3)) = v_d.
struct Glass {
  double n_d = 1.5;
  double v_d = 60.0;
  std::string name;

  // Throws ConfigError unless n_d > 1 and v_d > 0.
  void validate() const;

  double coefficient_a() const;
  double coefficient_b() const;  // nm²

  // Throws DegenerateDispersionError for v_d == 0.
  double index(double wavelength_nm) const;
};

// Index of a medium: air is exactly 1 at every wavelength.
struct Material {
  bool is_air = true;
  Glass glass;

  static Material air() { return {}; }
  static Material of(Glass g) { return {false, std::move(g)}; }

  double index(double wavelength_nm) const { return is_air ? 1.0 : glass.index(wavelength_nm); }
};

struct GlassCatalog {
  std::vector<Glass> entries;
  double alpha_n = 100.0;
  double alpha_v = 0.0004;

  void validate() const;

  // Weighted squared distance α_n (n - n_cat)² + α_v (v - v_cat)².
  double distance(double n_d, double v_d, const Glass& entry) const;

  struct Match {
    std::size_t index = 0;
    double distance = 0.0;
  };
  // Throws ConfigError on an empty catalog.
  Match nearest(double n_d, double v_d) const;
};

}  // namespace lensforge
