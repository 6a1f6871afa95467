#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "lensforge/error.hpp"
#include "lensforge/io/files.hpp"
#include "lensforge/merit/losses.hpp"
#include "lensforge/merit/optifusion_loss.hpp"
#include "lensforge/raytrace/paraxial.hpp"

using namespace lensforge;

namespace {

TraceResult cell(double cx, std::initializer_list<std::pair<double, double>> hits) {
  TraceResult t;
  t.chief_hit = {cx, 0.0, true};
  for (auto [x, y] : hits) t.image_hits.push_back({x, y, true});
  return t;
}

}  // namespace

TEST_CASE("spot RMS") {
  const double a = 0.013, xb = 4.2;
  CHECK(*spot_rms(cell(xb, {{xb, 0}, {xb, 0}})) == 0.0);
  const auto r = spot_rms(cell(xb, {{xb + a, 0}, {xb - a, 0}, {xb, a}, {xb, -a}}));
  CHECK(std::abs(*r - a) < 1e-12);
  TraceResult empty;
  empty.image_hits.push_back({0, 0, false});
  CHECK_FALSE(spot_rms(empty).has_value());
}

TEST_CASE("spot loss is the mean over cells") {
  const std::vector<TraceResult> cells{cell(0, {{0.01, 0}, {-0.01, 0}}), cell(1, {{1.03, 0}, {0.97, 0}})};
  CHECK(*spot_loss(cells) == doctest::Approx((0.01 + 0.03) / 2).epsilon(1e-12));
}

TEST_CASE("lateral colour") {
  CHECK(lateral_chromatic_loss({{3.0}}) == 0.0);
  CHECK(std::abs(lateral_chromatic_loss({{10.00, 10.02, 10.05}}) - 0.05) < 1e-12);
  CHECK(std::abs(lateral_chromatic_loss({{1.0, 1.02}, {2.0, 2.04}}) - 0.03) < 1e-12);
}

TEST_CASE("linear constraint loss") {
  std::vector<ConstraintInput> in{{Quantity::Efl, 40.0, {39, 41}, 0.1}};
  CHECK(linear_constraint_loss(in).total == 0.0);
  in = {{Quantity::Ttl, 52.0, {-INFINITY, 50.0}, 1.0}};
  CHECK(std::abs(linear_constraint_loss(in).total - 2.0) < 1e-12);
  in = {{Quantity::Ttl, 51.0, {-INFINITY, 50.0}, 0.01}, {Quantity::Distortion, 2.0, {-1.0, 1.0}, 1.0}};
  const auto r = linear_constraint_loss(in);
  CHECK(std::abs(r.total - 0.505) < 1e-12);
  REQUIRE(r.terms.size() == 2);
  CHECK(r.terms[1].violation == doctest::Approx(1.0));
}

TEST_CASE("violation below the minimum") { CHECK(violation(0.5, {1.0, 8.0}) == 0.5); }

TEST_CASE("quadratic constraint plus glass loss") {
  GlassCatalog cat;
  cat.entries = {{1.6, 50.0, "e"}, {1.8, 30.0, "f"}};
  const std::vector<ConstraintInput> in{{Quantity::Bfl, 27.0, {29.0, INFINITY}, 1.0}};
  const std::vector<Glass> on{{1.6, 50.0, ""}};
  CHECK(std::abs(quadratic_constraint_loss(in).total + glass_variable_loss(on, cat) - 4.0) < 1e-12);
  CHECK(glass_variable_loss(on, cat) == 0.0);
  const std::vector<Glass> off{{1.61, 55.0, ""}};
  CHECK(std::abs(glass_variable_loss(off, cat) - 0.02) < 1e-12);
  const std::vector<ConstraintInput> ttl{{Quantity::Ttl, 51.0, {-INFINITY, 50.0}, 0.01}};
  CHECK(std::abs(quadratic_constraint_loss(ttl).total - 0.01) < 1e-15);
  CHECK_THROWS_AS(glass_variable_loss(on, GlassCatalog{}), ConfigError);
}

TEST_CASE("optifusion aggregate") {
  CHECK(combine_optifusion(0, 0, 0, 1.0, 0.25) == 0.0);
  CHECK(std::abs(combine_optifusion(0.03, 0.04, 0.0, 1.0, 0.25) - 0.04) < 1e-12);
}

TEST_CASE("loss is the mean over working distances") {
  auto spec = load_spec(fixtures::data_path("cooke_triplet_spec.json")).spec;
  spec.working_distances = {1e10, 3000.0};
  const auto lens = load_lens(fixtures::data_path("cooke_triplet.json"));
  const auto b = optifusion_loss(lens, spec);
  REQUIRE(b.feasible);
  REQUIRE(b.per_distance.size() == 2);
  CHECK(b.l_of == doctest::Approx((b.per_distance[0].l_of + b.per_distance[1].l_of) / 2).epsilon(1e-14));
  for (const auto& d : b.per_distance)
    CHECK(d.l_of == doctest::Approx(combine_optifusion(d.l_s, d.l_lc, d.l_pc, spec.search.alpha_iq,
                                                       spec.search.alpha_lc)).epsilon(1e-14));
}

TEST_CASE("untraceable lens takes the penalty floor") {
  auto spec = load_spec(fixtures::data_path("cooke_triplet_spec.json")).spec;
  auto lens = load_lens(fixtures::data_path("cooke_triplet.json"));
  lens.surfaces[0].curvature = 0.2;  // R = 5 mm against an 8 mm pupil radius
  const auto b = optifusion_loss(lens, spec);
  CHECK_FALSE(b.feasible);
  CHECK(b.l_of >= kInfeasibleLoss);
  CHECK(b.l_of <= kInfeasibleLoss + 1.0);
}

TEST_CASE("edge values of a singlet") {
  auto lens = fixtures::singlet(0.02, -0.02, 5.0, 1.5);
  lens.surfaces[1].semi_diameter = 6.0;
  lens.surfaces[2].semi_diameter = 6.0;
  const auto e = edge_values(lens);
  REQUIRE(e.glass_edge.size() == 1);
  CHECK(e.glass_edge[0] == doctest::Approx(5.0 - 2 * sphere_sag(0.02, 6.0)).epsilon(1e-12));
}
