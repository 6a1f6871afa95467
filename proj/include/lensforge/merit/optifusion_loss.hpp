#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lensforge/lens/design_spec.hpp"
#include "lensforge/lens/lens_system.hpp"
#include "lensforge/merit/losses.hpp"
#include "lensforge/raytrace/trace.hpp"

namespace lensforge {

// Penalty floor for a lens that cannot be traced; the invalid-ray fraction is
// added so that infeasible candidates still order among themselves.
inline constexpr double kInfeasibleLoss = 1e4;
inline constexpr double kSemiDiameterMargin = 1.02;

struct SampleConfig {
  std::vector<double> fields_deg;
  std::vector<double> wavelengths;
  std::vector<double> distances;
  int pupil_rings = 6;

  static SampleConfig from_spec(const DesignSpec& spec);
};

// Aimed and traced pupil grids over distances x fields x wavelengths.
//
// Tracing runs unclipped; semi-diameters of the returned lens are then set
// to 1.02x the largest traced height per surface (the stop keeps its
// paraxial radius), so no sampled ray is vignetted.
struct SampledSystem {
  LensSystem lens;
  double stop_radius = 0.0;
  std::vector<std::vector<std::vector<TraceResult>>> cells;  // [distance][field][wavelength]
  std::size_t launched = 0;
  std::size_t invalid = 0;
  bool feasible = false;
  std::string failure;

  double invalid_fraction() const {
    return launched == 0 ? 1.0 : static_cast<double>(invalid) / static_cast<double>(launched);
  }
};

SampledSystem sample_system(const LensSystem& lens, const SampleConfig& config);

// Center-to-edge quantities at the assigned semi-diameters.
struct EdgeValues {
  std::vector<double> glass_edge;  // one per glass gap
  std::vector<double> air_edge;    // one per air gap between surfaces (image gap excluded)
};
EdgeValues edge_values(const LensSystem& lens);

// Values of every constrained quantity at one object distance; edge
// quantities expand to one input per gap.
std::vector<ConstraintInput> constraint_inputs(const LensSystem& lens_with_semi_diameters,
                                               const DesignSpec& spec, double object_distance);

struct DistanceLoss {
  double distance = 0.0;
  double l_s = 0.0;
  double l_lc = 0.0;
  double l_pc = 0.0;
  double l_of = 0.0;
  ConstraintReport constraints;
};

struct LossBreakdown {
  double l_s = 0.0;
  double l_lc = 0.0;
  double l_pc = 0.0;
  double l_of = 0.0;
  bool feasible = true;
  double invalid_fraction = 0.0;
  std::string failure;
  std::vector<DistanceLoss> per_distance;
};

// l_pc + alpha_iq * (l_s + alpha_lc * l_lc)
double combine_optifusion(double l_s, double l_lc, double l_pc, double alpha_iq, double alpha_lc);

// Aim, trace, and score a lens against a design spec, averaged over working
// distances. Untraceable lenses score kInfeasibleLoss + invalid fraction.
LossBreakdown optifusion_loss(const LensSystem& lens, const DesignSpec& spec);

}  // namespace lensforge
