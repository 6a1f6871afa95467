#include <cstdio>
#include <string>

#include "doctest.h"
#include "fixtures.hpp"
#include "lensforge/error.hpp"
#include "lensforge/io/files.hpp"
#include "lensforge/io/manifest.hpp"
#include "lensforge/io/plot.hpp"
#include "lensforge/raytrace/paraxial.hpp"

using namespace lensforge;

namespace {

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

const char* kLens = R"({
  "schema_version": 1,
  "kind": "lens",
  "design_form": "SGA",
  "entrance_pupil_diameter": 10,
  "image_distance": 50,
  "surfaces": [
    {"curvature": 0, "thickness": 0, "material": "air", "stop": true},
    {"radius": 50, "thickness": 5, "material": {"name": "x", "n_d": 1.5, "v_d": 60}},
    {"radius": -50, "material": "air"}
  ]
})";

}  // namespace

TEST_CASE("lens JSON round trip") {
  const LensSystem a = parse_lens(kLens);
  CHECK(a.surfaces.size() == 3);
  CHECK(a.surfaces[1].curvature == doctest::Approx(0.02));
  const LensSystem b = parse_lens(lens_to_json(a));
  REQUIRE(b.surfaces.size() == a.surfaces.size());
  for (std::size_t k = 0; k < a.surfaces.size(); ++k) {
    CHECK(b.surfaces[k].curvature == a.surfaces[k].curvature);
    CHECK(b.surfaces[k].thickness_after == a.surfaces[k].thickness_after);
  }
  CHECK(b.image_distance == a.image_distance);
  CHECK(lens_to_json(b) == lens_to_json(a));
}

TEST_CASE("errors carry file, line and field") {
  std::string bad = kLens;
  bad.replace(bad.find("\"v_d\": 60"), 9, "\"v_d\": -6");
  const std::string msg = error_of([&] { parse_lens(bad, "bad.json"); });
  CHECK(msg.find("bad.json:9:") == 0);
  CHECK(msg.find("surfaces[1].material") != std::string::npos);

  const std::string broken = error_of([] { parse_lens("{\n  \"schema_version\": 1,\n  oops\n}", "b.json"); });
  CHECK(broken.find("b.json:3:") == 0);
  CHECK(broken.find("malformed JSON") != std::string::npos);

  std::string version = kLens;
  version.replace(version.find("\"schema_version\": 1"), 19, "\"schema_version\": 7");
  CHECK(error_of([&] { parse_lens(version, "v.json"); }).find("schema_version") != std::string::npos);
}

TEST_CASE("spec file with an EPJO section") {
  const SpecFile f = load_spec(fixtures::data_path("cooke_triplet_spec.json"));
  CHECK(f.spec.hfov_deg == 20.0);
  CHECK(f.spec.design_forms == std::vector<std::string>{"GAGASAGA"});
  const std::string msg = error_of([] {
    parse_spec(R"({"schema_version": 1, "kind": "spec", "f_number": 0})", "s.json");
  });
  CHECK(msg.find("f_number") != std::string::npos);
}

TEST_CASE("catalog and sensor files") {
  const GlassCatalog c = load_catalog(fixtures::data_path("catalog.json"));
  CHECK(c.entries.size() == 20);
  const SensorModel s = load_sensor(fixtures::data_path("sensor.json"));
  CHECK(s.psf_size % 2 == 1);
  const std::string msg = error_of([] {
    parse_sensor(R"({"schema_version": 1, "kind": "sensor", "psf_size": 32})", "x.json");
  });
  CHECK(msg.find("psf_size") != std::string::npos);
}

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("manifest lists outputs and refuses missing ones") {
  const std::string out = "/tmp/lensforge_unit_manifest_out.txt", man = "/tmp/lensforge_unit_manifest.json";
  write_text(out, "x");
  RunManifest m("test", {"--a", "1"});
  m.set_seed(3);
  m.stage("one", "done");
  m.add_output(out);
  m.write(man);
  const std::string text = read_text(man);
  CHECK(text.find("\"seed\": 3") != std::string::npos);
  CHECK(text.find(out) != std::string::npos);
  RunManifest other("test", {"--a", "1"});
  CHECK(other.config_hash() == m.config_hash());
  other.add_output("/tmp/lensforge_unit_missing_output");
  CHECK_THROWS_AS(other.write(man), Error);
  std::remove(out.c_str());
  std::remove(man.c_str());
}

TEST_CASE("cross section of a singlet") {
  const LensSystem lens = fixtures::singlet(0.02, -0.02, 5.0, 1.5, 50.0, 10.0);
  const std::vector<double> fields{0.0, 5.0};
  const CrossSection cs = cross_section_svg(lens, fields);
  CHECK(cs.warnings.empty());
  CHECK(count(cs.svg, "class=\"surface\"") == 2);
  CHECK(count(cs.svg, "class=\"stop\"") == 1);
  CHECK(count(cs.svg, "class=\"image-plane\"") == 1);
  CHECK(cs.rays > 0);
  CHECK(count(cs.svg, "class=\"ray\"") == cs.rays);
  // axial extent: image plane sits TTL·scale to the right of the first vertex
  const double ttl = lens.total_track();
  CHECK(cs.svg.find("data-ttl=\"" + std::to_string(ttl).substr(0, std::to_string(ttl).find('.') + 4) + "\"") !=
        std::string::npos);
  const auto p = cs.svg.find("class=\"image-plane\" x1=\"");
  REQUIRE(p != std::string::npos);
  const double x = std::stod(cs.svg.substr(p + 24));
  CHECK(x - 40.0 == doctest::Approx(ttl * cs.scale).epsilon(1e-4));
}

TEST_CASE("spot diagram counts every traced ray") {
  const LensSystem lens = fixtures::doublet();
  const std::vector<double> fields{0.0, 4.0}, wl{486.1, 587.6};
  const SpotDiagram sd = spot_diagram_svg(lens, fields, wl, kInfiniteDistance, 3);
  REQUIRE(sd.points_per_field.size() == 2);
  CHECK(sd.warnings.empty());
  const std::size_t grid = 1 + 3 * 3 * 4;  // 1 + 3 r (r + 1) for 3 rings
  CHECK(sd.points_per_field[0] == 2 * grid);
  CHECK(count(sd.svg, "class=\"spot\"") == sd.points_per_field[0] + sd.points_per_field[1]);
}

TEST_CASE("lost rays are reported, not drawn") {
  LensSystem lens = fixtures::singlet(0.5, -0.5, 0.5, 1.5, 50.0, 10.0);  // radius 2 mm, pupil 10 mm
  const std::vector<double> fields{0.0};
  const CrossSection cs = cross_section_svg(lens, fields);
  CHECK(cs.rays < 13);
  REQUIRE_FALSE(cs.warnings.empty());
  CHECK(cs.warnings[0].find("rays lost") != std::string::npos);
  CHECK(count(cs.svg, "class=\"surface\"") == 2);
}
