#include "lensforge/merit/optifusion_loss.hpp"

#include <algorithm>
#include <cmath>

#include "lensforge/error.hpp"
#include "lensforge/raytrace/aim.hpp"
#include "lensforge/raytrace/paraxial.hpp"

namespace lensforge {

namespace {

// A stop this small relative to the pupil means the marginal ray barely
// reaches it; every spot would collapse onto the chief ray.
constexpr double kMinStopRatio = 1e-6;

double edge_sag(const Surface& s) {
  if (s.curvature == 0.0) return 0.0;
  const double h = std::min(s.semi_diameter, 1.0 / std::abs(s.curvature));
  return sphere_sag(s.curvature, h);
}

}  // namespace

SampleConfig SampleConfig::from_spec(const DesignSpec& spec) {
  return {spec.sampled_fields_deg(), spec.wavelengths, spec.working_distances, spec.pupil_rings};
}

SampledSystem sample_system(const LensSystem& lens, const SampleConfig& config) {
  SampledSystem out;
  out.lens = lens;
  for (auto& s : out.lens.surfaces) s.semi_diameter = std::numeric_limits<double>::infinity();
  const std::size_t ns = lens.surfaces.size();
  const auto grid = hexapolar_grid(config.pupil_rings);
  // Lower-half pupil points trace as exact mirror images of upper-half ones.
  std::vector<std::ptrdiff_t> mirror(grid.size(), -1);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i].y >= 0.0) continue;
    for (std::size_t j = 0; j < grid.size(); ++j)
      if (grid[j].y >= 0.0 && std::abs(grid[j].x - grid[i].x) <= 1e-12 &&
          std::abs(grid[j].y + grid[i].y) <= 1e-12) {
        mirror[i] = static_cast<std::ptrdiff_t>(j);
        break;
      }
  }

  try {
    out.stop_radius = stop_radius(out.lens);
  } catch (const Error& e) {
    out.failure = e.what();
    return out;
  }
  if (!(out.stop_radius > kMinStopRatio * lens.entrance_pupil_diameter) ||
      !std::isfinite(out.stop_radius)) {
    out.failure = "stop radius degenerate";
    return out;
  }

  std::vector<PreparedLens> prepared;
  prepared.reserve(config.wavelengths.size());
  for (double w : config.wavelengths) prepared.push_back(PreparedLens::make(out.lens, w));

  std::vector<double> heights(ns, 0.0);
  bool chief_lost = false;
  out.cells.resize(config.distances.size());
  for (std::size_t di = 0; di < config.distances.size(); ++di) {
    auto& per_field = out.cells[di];
    per_field.resize(config.fields_deg.size());
    for (std::size_t fi = 0; fi < config.fields_deg.size(); ++fi) {
      AimedBundle previous;
      bool have_previous = false;
      for (const auto& pl : prepared) {
        TraceResult cell;
        cell.surface_heights.assign(ns, 0.0);
        out.launched += grid.size();
        AimedBundle bundle;
        try {
          bundle = aim_rays(pl, out.stop_radius, config.fields_deg[fi], config.distances[di], grid,
                            {}, have_previous ? &previous : nullptr);
        } catch (const FieldUnreachableError& e) {
          if (out.failure.empty()) out.failure = e.what();
          chief_lost = true;
          cell.image_hits.assign(grid.size(), ImageHit{});
          out.invalid += grid.size();
          per_field[fi].push_back(std::move(cell));
          continue;
        }
        const TraceStatus status{false, cell.surface_heights};
        cell.image_hits.resize(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) {
          if (mirror[i] >= 0) continue;
          const Ray img = trace_to_image(pl, bundle.rays[i], status);
          cell.image_hits[i] = {img.origin.x, img.origin.y, img.valid};
        }
        for (std::size_t i = 0; i < grid.size(); ++i) {
          if (mirror[i] >= 0) {
            const ImageHit& m = cell.image_hits[static_cast<std::size_t>(mirror[i])];
            cell.image_hits[i] = {m.x, -m.y, m.valid && bundle.rays[i].valid};
          }
          if (!cell.image_hits[i].valid) ++out.invalid;
        }
        const Ray c = trace_to_image(pl, bundle.chief, {false, {}});
        cell.chief_hit = {c.origin.x, c.origin.y, c.valid};
        if (!c.valid) chief_lost = true;
        for (std::size_t s = 0; s < ns; ++s) heights[s] = std::max(heights[s], cell.surface_heights[s]);
        per_field[fi].push_back(std::move(cell));
        previous = std::move(bundle);
        have_previous = true;
      }
    }
  }

  for (std::size_t s = 0; s < ns; ++s) {
    auto& surf = out.lens.surfaces[s];
    surf.semi_diameter = surf.is_stop ? out.stop_radius : kSemiDiameterMargin * heights[s];
    if (!(surf.semi_diameter > 0.0)) surf.semi_diameter = out.stop_radius;
  }
  out.feasible = !chief_lost && out.invalid == 0;
  if (!out.feasible && out.failure.empty())
    out.failure = std::to_string(out.invalid) + " of " + std::to_string(out.launched) + " rays lost";
  return out;
}

EdgeValues edge_values(const LensSystem& lens) {
  const FormLayout layout = FormLayout::parse(lens.design_form);
  EdgeValues out;
  for (std::size_t i = 0; i + 1 < lens.surfaces.size(); ++i) {
    const auto gap = layout.surfaces[i].gap;
    if (gap != GapKind::GlassThickness && gap != GapKind::AirSpacing) continue;
    const auto& a = lens.surfaces[i];
    const auto& b = lens.surfaces[i + 1];
    const double edge = a.thickness_after - edge_sag(a) + edge_sag(b);
    (gap == GapKind::GlassThickness ? out.glass_edge : out.air_edge).push_back(edge);
  }
  return out;
}

std::vector<ConstraintInput> constraint_inputs(const LensSystem& lens, const DesignSpec& spec,
                                               double object_distance) {
  std::vector<ConstraintInput> out;
  if (spec.constraints.empty()) return out;

  bool need_real_chief = false;
  for (const auto& c : spec.constraints)
    need_real_chief |= c.quantity == Quantity::Distortion || c.quantity == Quantity::ImageHeight;

  ParaxialSummary summary;
  if (need_real_chief) {
    summary = paraxial_analysis(lens, object_distance, spec.hfov_deg);
  } else {
    summary.efl = effective_focal_length(lens);
    summary.bfl = back_focal_length(lens);
    summary.ttl = lens.total_track();
  }
  const EdgeValues edges = edge_values(lens);

  for (const auto& c : spec.constraints) {
    auto push = [&](double v) { out.push_back({c.quantity, v, c.bounds, c.weight}); };
    switch (c.quantity) {
      case Quantity::Efl: push(summary.efl); break;
      case Quantity::Bfl: push(summary.bfl); break;
      case Quantity::Ttl: push(summary.ttl); break;
      case Quantity::Distortion: push(summary.distortion); break;
      case Quantity::ImageHeight: push(summary.image_height); break;
      case Quantity::GlassEdgeThickness:
        for (double v : edges.glass_edge) push(v);
        break;
      case Quantity::AirEdgeSpacing:
        for (double v : edges.air_edge) push(v);
        break;
    }
  }
  return out;
}

double combine_optifusion(double l_s, double l_lc, double l_pc, double alpha_iq, double alpha_lc) {
  return l_pc + alpha_iq * (l_s + alpha_lc * l_lc);
}

LossBreakdown optifusion_loss(const LensSystem& lens, const DesignSpec& spec) {
  LossBreakdown out;
  auto infeasible = [&](double fraction, std::string why) {
    out = LossBreakdown{};
    out.feasible = false;
    out.invalid_fraction = fraction;
    out.l_of = kInfeasibleLoss + fraction;
    out.failure = std::move(why);
    return out;
  };

  const SampledSystem sampled = sample_system(lens, SampleConfig::from_spec(spec));
  if (!sampled.feasible) return infeasible(sampled.invalid_fraction(), sampled.failure);

  const auto& sp = spec.search;
  const double nd = static_cast<double>(spec.working_distances.size());
  for (std::size_t di = 0; di < spec.working_distances.size(); ++di) {
    DistanceLoss d;
    d.distance = spec.working_distances[di];
    std::vector<TraceResult> flat;
    std::vector<std::vector<double>> chief_x;
    for (const auto& per_wave : sampled.cells[di]) {
      chief_x.emplace_back();
      for (const auto& cell : per_wave) {
        flat.push_back(cell);
        chief_x.back().push_back(cell.chief_hit.x);
      }
    }
    const auto ls = spot_loss(flat);
    if (!ls) return infeasible(sampled.invalid_fraction(), "empty spot cell");
    d.l_s = *ls;
    d.l_lc = lateral_chromatic_loss(chief_x);
    try {
      const auto inputs = constraint_inputs(sampled.lens, spec, d.distance);
      d.constraints = linear_constraint_loss(inputs);
    } catch (const Error& e) {
      return infeasible(1.0, e.what());
    }
    d.l_pc = d.constraints.total;
    if (!std::isfinite(d.l_pc)) return infeasible(1.0, "constraint quantity not finite");
    d.l_of = combine_optifusion(d.l_s, d.l_lc, d.l_pc, sp.alpha_iq, sp.alpha_lc);
    out.l_s += d.l_s / nd;
    out.l_lc += d.l_lc / nd;
    out.l_pc += d.l_pc / nd;
    out.l_of += d.l_of / nd;
    out.per_distance.push_back(std::move(d));
  }
  out.feasible = true;
  return out;
}

}  // namespace lensforge
