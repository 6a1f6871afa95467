#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "lensforge/error.hpp"
#include "lensforge/lens/design_spec.hpp"
#include "lensforge/lens/glass.hpp"
#include "lensforge/lens/lens_system.hpp"
#include "lensforge/lens/param_vector.hpp"
#include "lensforge/optifusion/rng.hpp"

using namespace lensforge;

TEST_CASE("d-line index is returned exactly") {
  const Glass g{1.5168, 64.17, "bk7"};
  CHECK(g.index(kLineD) == 1.5168);
}

TEST_CASE("F-C dispersion reproduces the Abbe number") {
  const Glass g{1.62004, 36.37, "f2"};
  CHECK(g.index(kLineF) - g.index(kLineC) == doctest::Approx((g.n_d - 1) / g.v_d).epsilon(1e-13));
}

TEST_CASE("BK7-like index at F from an independent two-line solve") {
  // n = A + B/λ²: n_d = A + B/λd², n_F - n_C = B (1/λF² - 1/λC²)
  const double nd = 1.5168, vd = 64.17;
  const double B = ((nd - 1) / vd) / (1 / (486.1 * 486.1) - 1 / (656.3 * 656.3));
  const double A = nd - B / (587.6 * 587.6);
  const Glass g{nd, vd, ""};
  CHECK(g.index(486.1) == doctest::Approx(A + B / (486.1 * 486.1)).epsilon(1e-14));
  CHECK(g.coefficient_a() == doctest::Approx(A).epsilon(1e-14));
  CHECK(g.coefficient_b() == doctest::Approx(B).epsilon(1e-12));
}

TEST_CASE("glass errors") {
  CHECK_THROWS_AS(Glass({1.5, 0.0, "x"}).index(500), DegenerateDispersionError);
  CHECK_THROWS_AS(Glass({0.9, 50.0, "x"}).validate(), ConfigError);
  GlassCatalog empty;
  CHECK_THROWS_AS(empty.nearest(1.5, 60), ConfigError);
}

TEST_CASE("air has unit index everywhere") {
  CHECK(Material::air().index(400) == 1.0);
  CHECK(Material::air().index(700) == 1.0);
}

TEST_CASE("design forms") {
  const auto f = FormLayout::parse("GAGASAGA");
  CHECK(f.surfaces.size() == 7);
  CHECK(f.glass_count == 3);
  CHECK(f.stop_index == 4);
  CHECK(f.surfaces.back().gap == GapKind::Image);
  const auto c = FormLayout::parse("SGGA");  // cemented
  CHECK(c.surfaces.size() == 4);
  CHECK(c.glass_count == 2);
  CHECK_THROWS_AS(FormLayout::parse("GAGA"), StructuralError);
  CHECK_THROWS_AS(FormLayout::parse("GASSGA"), StructuralError);
  CHECK_THROWS_AS(FormLayout::parse("GAXSGA"), StructuralError);
  CHECK_THROWS_AS(FormLayout::parse("SGAG"), StructuralError);
}

TEST_CASE("sphere sag") {
  const double c = 0.01, y = 5;
  CHECK(sphere_sag(c, y) == doctest::Approx((1 - std::sqrt(1 - c * c * y * y)) / c).epsilon(1e-14));
  CHECK(sphere_sag(0.0, 3.0) == 0.0);
  CHECK(std::isnan(sphere_sag(0.5, 3.0)));
}

TEST_CASE("vertex positions and track") {
  const auto l = fixtures::singlet(0.02, -0.02, 5.0, 1.5, 40.0);
  CHECK(l.vertex_z(2) == 5.0);
  CHECK(l.total_track() == 45.0);
}

namespace {

std::size_t find_entry(const ParamSchema& s, ParamRole role, std::size_t index) {
  for (std::size_t i = 0; i < s.entries.size(); ++i)
    if (s.entries[i].role == role && s.entries[i].index == index) return i;
  FAIL("entry not found");
  return 0;
}

}  // namespace

TEST_CASE("normalization of single values") {
  ParameterRanges r;
  r.curvature = {-0.1, 0.1};
  r.air_spacing = {1, 15};
  auto schema = ParamSchema::build(FormLayout::parse("SGAGA"), r, 8.0);
  auto lens = fixtures::doublet();
  lens.surfaces[1].curvature = 0.0;
  lens.surfaces[3].curvature = 0.1;
  lens.surfaces[2].thickness_after = 4.5;
  const auto x = normalize(lens, schema).x.values;
  CHECK(x[find_entry(*schema, ParamRole::Curvature, 1)] == 0.5);
  CHECK(x[find_entry(*schema, ParamRole::Curvature, 3)] == 1.0);
  CHECK(x[find_entry(*schema, ParamRole::Spacing, 2)] == doctest::Approx(0.25).epsilon(1e-15));
  const ParamEntry e{ParamRole::Spacing, 2, {1, 15}};
  CHECK(physical_value(e, 0.25) == 4.5);
}

TEST_CASE("all-half vector maps to range midpoints") {
  const ParameterRanges r;
  auto schema = ParamSchema::build(FormLayout::parse("GAGASAGA"), r, 16.0);
  const std::vector<double> half(schema->size(), 0.5);
  const auto lens = denormalize(*schema, half);
  for (const auto& e : schema->entries) {
    double v = 0;
    switch (e.role) {
      case ParamRole::Curvature: v = lens.surfaces[e.index].curvature; break;
      case ParamRole::Spacing:
        v = schema->layout.surfaces[e.index].gap == GapKind::Image ? lens.image_distance
                                                                   : lens.surfaces[e.index].thickness_after;
        break;
      case ParamRole::IndexD: v = lens.glass(e.index).n_d; break;
      case ParamRole::AbbeD: v = lens.glass(e.index).v_d; break;
    }
    CHECK(v == doctest::Approx(e.range.mid()).epsilon(1e-15));
  }
  CHECK(lens.surfaces[lens.stop_index].is_stop);
}

TEST_CASE("normalize inverts denormalize") {
  const ParameterRanges r;
  auto schema = ParamSchema::build(FormLayout::parse("GAGASAGA"), r, 16.0);
  Stream rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(schema->size());
    for (auto& v : x) v = rng.uniform();
    const auto back = normalize(denormalize(*schema, x), schema);
    CHECK(back.clamped.empty());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(back.x.values[i] == doctest::Approx(x[i]).epsilon(1e-12));
  }
}

TEST_CASE("out-of-box values clamp") {
  const ParameterRanges r;
  auto schema = ParamSchema::build(FormLayout::parse("SGA"), r, 10.0);
  std::vector<double> x(schema->size(), 0.5);
  x[0] = 1.7;
  const auto lens = denormalize(*schema, x);
  CHECK(lens.surfaces[schema->entries[0].index].curvature == r.curvature.hi);
  CHECK(total_track(*schema, x) == doctest::Approx(lens.total_track()).epsilon(1e-14));
}

TEST_CASE("pinned glass overrides vector coordinates") {
  const ParameterRanges r;
  auto schema = ParamSchema::build(FormLayout::parse("SGAGA"), r, 8.0);
  auto pinned = schema->with_fixed_glass(1, Glass{1.7, 30.0, "pin"});
  const auto mask = pinned->free_mask();
  const auto [ni, vi] = pinned->glass_coordinates(1);
  CHECK_FALSE(mask[ni]);
  CHECK_FALSE(mask[vi]);
  std::vector<double> x(pinned->size(), 0.3);
  const auto lens = denormalize(*pinned, x);
  CHECK(lens.glass(1).n_d == 1.7);
  CHECK(lens.glass(1).name == "pin");
  CHECK_THROWS_AS(schema->with_fixed_glass(5, Glass{}), StructuralError);
}

TEST_CASE("schema and vector length mismatch") {
  const ParameterRanges r;
  auto schema = ParamSchema::build(FormLayout::parse("SGA"), r, 10.0);
  const std::vector<double> x(schema->size() + 1, 0.5);
  CHECK_THROWS_AS(denormalize(*schema, x), StructuralError);
  CHECK_THROWS_AS(normalize(fixtures::doublet(), schema), StructuralError);
}

TEST_CASE("spec validation names the field") {
  DesignSpec s;
  s.f_number = -1;
  try {
    s.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("f_number") != std::string::npos);
  }
}

TEST_CASE("catalog nearest entry by exhaustive scan") {
  GlassCatalog cat;
  cat.entries = {{1.5168, 64.2, "a"}, {1.62, 36.4, "b"}, {1.744, 44.9, "c"}, {1.6, 60.0, "d"}};
  Stream rng(3);
  for (int i = 0; i < 200; ++i) {
    const double n = rng.uniform(1.5, 1.76), v = rng.uniform(28, 70);
    std::size_t best = 0;
    double bd = 1e300;
    for (std::size_t k = 0; k < cat.entries.size(); ++k) {
      const double d = 100 * std::pow(n - cat.entries[k].n_d, 2) + 0.0004 * std::pow(v - cat.entries[k].v_d, 2);
      if (d < bd) bd = d, best = k;
    }
    const auto m = cat.nearest(n, v);
    CHECK(m.index == best);
    CHECK(m.distance == doctest::Approx(bd).epsilon(1e-14));
  }
}
