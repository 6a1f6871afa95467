#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace lensforge {

struct Range {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool contains(double v) const { return v >= lo && v <= hi; }
};

// Physical quantities that can carry a soft constraint.
enum class Quantity { Efl, Distortion, AirEdgeSpacing, GlassEdgeThickness, Bfl, Ttl, ImageHeight };

std::string_view quantity_name(Quantity q);
// Throws ConfigError for an unknown name.
Quantity parse_quantity(std::string_view name);

struct ConstraintSpec {
  Quantity quantity = Quantity::Efl;
  Range bounds;
  double weight = 0.0;
};

// Hard boxes of the optimization variables.
struct ParameterRanges {
  Range curvature{-0.1, 0.1};
  Range glass_thickness{4.0, 15.0};
  Range air_spacing{1.0, 15.0};
  Range image_distance{1.0, 60.0};
  Range index{1.51, 1.76};
  Range abbe{27.5, 71.3};
};

struct AdamParams {
  double learning_rate = 0.02;
  double floor_ratio = 0.01;  // cosine schedule ends at learning_rate * floor_ratio
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t budget = 300;
  double fd_step = 1e-4;
};

struct SearchParams {
  std::size_t population = 500;  // m
  std::size_t generations = 10;  // N
  double alpha_lc = 0.25;
  double alpha_iq = 1.0;
  double alpha_sa = 0.1;
  double sa_step = 0.1;
  double convergence_threshold = 0.025;
  std::size_t convergence_window = 20;
  std::size_t sa_max_iterations = 2000;
  double parent_fraction = 0.06;
  double elite_fraction = 0.02;
  double mutation_fraction = 0.3;
  std::size_t mutation_retries = 10;
  double similarity_distance = 0.2;
  double output_loss_ceiling = 0.04;
  double output_diversity_distance = 0.25;
  AdamParams adam;
};

struct DesignSpec {
  std::vector<std::string> design_forms{"GAGASAGA"};
  double hfov_deg = 20.0;
  double f_number = 2.5;
  Range efl{40.0, 40.0};
  std::vector<double> working_distances{1e10};  // mm from the first vertex
  std::vector<double> wavelengths{486.1, 587.6, 656.3};
  std::vector<double> field_fractions{0.0, 0.5, 0.7, 1.0};
  int pupil_rings = 6;
  ParameterRanges ranges;
  std::vector<ConstraintSpec> constraints;
  SearchParams search;

  double entrance_pupil_diameter() const { return efl.mid() / f_number; }
  std::vector<double> sampled_fields_deg() const;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// Cooke-triplet setup: GAGASAGA, EFL 40 mm, f/2.5, HFOV 20°, infinite object.
DesignSpec cooke_triplet_spec();

}  // namespace lensforge
