#include "lensforge/io/files.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "lensforge/error.hpp"

namespace lensforge {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write to '" + path + "' failed");
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {

using Path = std::vector<std::string>;  // keys, or "[k]" for array slots

std::string path_string(const Path& p) {
  std::string s;
  for (const auto& seg : p) {
    if (!s.empty() && seg[0] != '[') s += '.';
    s += seg;
  }
  return s.empty() ? "<root>" : s;
}

// Walks the raw text to find the line where the value at `target` starts.
class Locator {
 public:
  Locator(std::string_view s, const Path& target) : s_(s), target_(target) {}

  int find() {
    Path p;
    return value(p);
  }

 private:
  void ws() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) {
      if (s_[i_] == '\n') ++line_;
      ++i_;
    }
  }
  std::string str() {
    std::string out;
    ++i_;
    while (i_ < s_.size() && s_[i_] != '"') {
      if (s_[i_] == '\\') ++i_;
      if (i_ < s_.size()) out += s_[i_++];
    }
    ++i_;
    return out;
  }
  int value(Path& p) {
    ws();
    if (i_ >= s_.size()) return 0;
    if (p == target_) return line_;
    const char c = s_[i_];
    if (c == '{' || c == '[') {
      ++i_;
      for (std::size_t k = 0;; ++k) {
        ws();
        if (i_ >= s_.size()) return 0;
        if (s_[i_] == '}' || s_[i_] == ']') {
          ++i_;
          return 0;
        }
        if (c == '{') {
          if (s_[i_] != '"') return 0;
          p.push_back(str());
          ws();
          if (i_ >= s_.size() || s_[i_] != ':') return 0;
          ++i_;
        } else {
          p.push_back("[" + std::to_string(k) + "]");
        }
        if (int r = value(p)) return r;
        p.pop_back();
        ws();
        if (i_ < s_.size() && s_[i_] == ',') ++i_;
      }
    }
    if (c == '"') {
      str();
      return 0;
    }
    while (i_ < s_.size() && !std::strchr(",]} \t\r\n", s_[i_])) ++i_;
    return 0;
  }

  std::string_view s_;
  const Path& target_;
  std::size_t i_ = 0;
  int line_ = 1;
};

struct Doc {
  std::string text;
  std::string origin;
  json root;

  [[noreturn]] void fail(const Path& path, const std::string& msg) const {
    Path p = path;
    int line = 0;
    // fall back to the closest enclosing value that exists in the text
    while (true) {
      line = Locator(text, p).find();
      if (line || p.empty()) break;
      p.pop_back();
    }
    throw ConfigError(origin + ":" + std::to_string(line ? line : 1) + ": " + path_string(path) + ": " + msg);
  }
};

Doc parse_doc(std::string_view text, const std::string& origin) {
  Doc d{std::string(text), origin, {}};
  try {
    d.root = json::parse(d.text);
  } catch (const json::parse_error& e) {
    const std::size_t at = std::min<std::size_t>(e.byte, d.text.size());
    const int line = 1 + static_cast<int>(std::count(d.text.begin(), d.text.begin() + static_cast<std::ptrdiff_t>(at), '\n'));
    throw ConfigError(origin + ":" + std::to_string(line) + ": malformed JSON (" + e.what() + ")");
  }
  if (!d.root.is_object()) d.fail({}, "top level must be an object");
  return d;
}

class Node {
 public:
  Node(const Doc& doc, const json* j, Path path) : doc_(&doc), j_(j), path_(std::move(path)) {}

  bool present() const { return j_ != nullptr && !j_->is_null(); }
  const Path& path() const { return path_; }
  [[noreturn]] void fail(const std::string& msg) const { doc_->fail(path_, msg); }

  Node operator[](const std::string& key) const {
    Path p = path_;
    p.push_back(key);
    if (!j_ || !j_->is_object()) return {*doc_, nullptr, p};
    auto it = j_->find(key);
    return {*doc_, it == j_->end() ? nullptr : &*it, p};
  }
  Node at(std::size_t k) const {
    Path p = path_;
    p.push_back("[" + std::to_string(k) + "]");
    return {*doc_, &(*j_)[k], p};
  }
  std::size_t size() const {
    if (!present() || !j_->is_array()) fail("expected an array");
    return j_->size();
  }
  bool is_object() const { return present() && j_->is_object(); }
  bool is_array() const { return present() && j_->is_array(); }
  bool is_string() const { return present() && j_->is_string(); }

  void only(std::initializer_list<const char*> keys) const {
    if (!present()) return;
    if (!j_->is_object()) fail("expected an object");
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      bool ok = false;
      for (const char* k : keys) ok = ok || it.key() == k;
      if (!ok) (*this)[it.key()].fail("unknown field");
    }
  }

  double number() const {
    if (!present()) fail("missing required number");
    if (!j_->is_number()) fail("expected a number");
    return j_->get<double>();
  }
  double number(double fallback) const { return present() ? number() : fallback; }
  long long integer() const {
    if (!present()) fail("missing required integer");
    if (!j_->is_number_integer() && !j_->is_number_unsigned()) fail("expected an integer");
    return j_->get<long long>();
  }
  long long integer(long long fallback) const { return present() ? integer() : fallback; }
  std::size_t count(std::size_t fallback) const {
    if (!present()) return fallback;
    const long long v = integer();
    if (v < 0) fail("must be non-negative");
    return static_cast<std::size_t>(v);
  }
  std::string string() const {
    if (!present()) fail("missing required string");
    if (!j_->is_string()) fail("expected a string");
    return j_->get<std::string>();
  }
  bool boolean(bool fallback) const {
    if (!present()) return fallback;
    if (!j_->is_boolean()) fail("expected true or false");
    return j_->get<bool>();
  }
  std::vector<double> numbers(const std::vector<double>& fallback) const {
    if (!present()) return fallback;
    std::vector<double> out;
    for (std::size_t k = 0; k < size(); ++k) out.push_back(at(k).number());
    return out;
  }

 private:
  const Doc* doc_;
  const json* j_;
  Path path_;
};

void check_version(const Node& root) {
  const Node v = root["schema_version"];
  if (!v.present()) v.fail("missing; expected " + std::to_string(kSchemaVersion));
  if (v.integer() != kSchemaVersion)
    v.fail("unsupported version " + std::to_string(v.integer()) + "; expected " + std::to_string(kSchemaVersion));
}

// Runs a validate() and attaches a line to its "field: message" error.
template <class F>
void validated(const Doc& doc, F&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(": ");
    if (colon == std::string::npos) doc.fail({}, msg);
    Path p;
    std::string seg;
    for (char ch : msg.substr(0, colon)) {
      if (ch == '.') {
        p.push_back(seg);
        seg.clear();
      } else {
        seg += ch;
      }
    }
    p.push_back(seg);
    doc.fail(p, msg.substr(colon + 2));
  }
}

Range range_pair(const Node& n, const Range& fallback) {
  if (!n.present()) return fallback;
  if (n.is_array()) {
    if (n.size() != 2) n.fail("expected [lo, hi]");
    return {n.at(0).number(), n.at(1).number()};
  }
  if (n.is_object()) {
    n.only({"min", "max"});
    return {n["min"].number(-std::numeric_limits<double>::infinity()),
            n["max"].number(std::numeric_limits<double>::infinity())};
  }
  const double v = n.number();
  return {v, v};
}

Glass glass_of(const Node& n) {
  n.only({"name", "n_d", "v_d"});
  Glass g;
  g.name = n["name"].present() ? n["name"].string() : "";
  g.n_d = n["n_d"].number();
  g.v_d = n["v_d"].number();
  if (!(g.n_d > 1.0)) n["n_d"].fail("must exceed 1");
  if (!(g.v_d > 0.0)) n["v_d"].fail("must be positive");
  return g;
}

}  // namespace

// ---------------------------------------------------------------------------

LensSystem parse_lens(std::string_view text, const std::string& origin) {
  const Doc doc = parse_doc(text, origin);
  const Node root(doc, &doc.root, {});
  root.only({"schema_version", "kind", "design_form", "entrance_pupil_diameter", "image_distance", "surfaces"});
  check_version(root);
  LensSystem lens;
  lens.design_form = root["design_form"].string();
  lens.entrance_pupil_diameter = root["entrance_pupil_diameter"].number();
  if (!(lens.entrance_pupil_diameter > 0.0)) root["entrance_pupil_diameter"].fail("must be positive");
  lens.image_distance = root["image_distance"].number();
  const Node surfaces = root["surfaces"];
  if (!surfaces.is_array() || surfaces.size() == 0) surfaces.fail("expected a non-empty array");
  bool seen_stop = false;
  for (std::size_t k = 0; k < surfaces.size(); ++k) {
    const Node s = surfaces.at(k);
    s.only({"curvature", "radius", "thickness", "material", "semi_diameter", "stop"});
    Surface surf;
    if (s["curvature"].present() && s["radius"].present()) s.fail("give either curvature or radius, not both");
    if (s["radius"].present()) {
      const double r = s["radius"].number();
      if (r == 0.0) s["radius"].fail("use a curvature of 0 for a flat surface");
      surf.curvature = 1.0 / r;
    } else {
      surf.curvature = s["curvature"].number(0.0);
    }
    const bool last = k + 1 == surfaces.size();
    surf.thickness_after = last ? s["thickness"].number(0.0) : s["thickness"].number();
    const Node m = s["material"];
    if (!m.present() || (m.is_string() && m.string() == "air"))
      surf.material_after = Material::air();
    else if (m.is_object())
      surf.material_after = Material::of(glass_of(m));
    else
      m.fail("expected \"air\" or {name, n_d, v_d}");
    surf.semi_diameter = s["semi_diameter"].number(std::numeric_limits<double>::infinity());
    if (!(surf.semi_diameter > 0.0)) s["semi_diameter"].fail("must be positive");
    surf.is_stop = s["stop"].boolean(false);
    if (surf.is_stop) {
      if (seen_stop) s["stop"].fail("only one surface may be the stop");
      seen_stop = true;
      lens.stop_index = k;
    }
    lens.surfaces.push_back(surf);
  }
  try {
    lens.validate();
  } catch (const StructuralError& e) {
    doc.fail({"surfaces"}, e.what());
  }
  return lens;
}

LensSystem load_lens(const std::string& path) { return parse_lens(read_text(path), path); }

std::string lens_to_json(const LensSystem& lens) {
  ordered j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "lens";
  j["design_form"] = lens.design_form;
  j["entrance_pupil_diameter"] = lens.entrance_pupil_diameter;
  j["image_distance"] = lens.image_distance;
  ordered surfaces = ordered::array();
  for (std::size_t k = 0; k < lens.surfaces.size(); ++k) {
    const Surface& s = lens.surfaces[k];
    ordered o;
    o["curvature"] = s.curvature;
    o["thickness"] = k + 1 == lens.surfaces.size() ? 0.0 : s.thickness_after;
    if (s.material_after.is_air) {
      o["material"] = "air";
    } else {
      const Glass& g = s.material_after.glass;
      o["material"] = ordered{{"name", g.name}, {"n_d", g.n_d}, {"v_d", g.v_d}};
    }
    if (std::isfinite(s.semi_diameter)) o["semi_diameter"] = s.semi_diameter;
    if (s.is_stop) o["stop"] = true;
    surfaces.push_back(o);
  }
  j["surfaces"] = surfaces;
  return j.dump(2) + "\n";
}

void save_lens(const std::string& path, const LensSystem& lens) { write_text(path, lens_to_json(lens)); }

// ---------------------------------------------------------------------------

SpecFile parse_spec(std::string_view text, const std::string& origin) {
  const Doc doc = parse_doc(text, origin);
  const Node root(doc, &doc.root, {});
  root.only({"schema_version", "kind", "design_forms", "hfov_deg", "f_number", "efl", "working_distances",
             "wavelengths", "field_fractions", "pupil_rings", "ranges", "constraints", "search", "epjo"});
  check_version(root);
  SpecFile f;
  DesignSpec& s = f.spec;
  if (root["design_forms"].present()) {
    s.design_forms.clear();
    const Node forms = root["design_forms"];
    for (std::size_t k = 0; k < forms.size(); ++k) s.design_forms.push_back(forms.at(k).string());
  }
  s.hfov_deg = root["hfov_deg"].number(s.hfov_deg);
  s.f_number = root["f_number"].number(s.f_number);
  s.efl = range_pair(root["efl"], s.efl);
  s.working_distances = root["working_distances"].numbers(s.working_distances);
  s.wavelengths = root["wavelengths"].numbers(s.wavelengths);
  s.field_fractions = root["field_fractions"].numbers(s.field_fractions);
  s.pupil_rings = static_cast<int>(root["pupil_rings"].integer(s.pupil_rings));

  const Node r = root["ranges"];
  r.only({"curvature", "glass_center_thickness", "air_center_spacing", "image_distance", "refractive_index",
          "abbe_number"});
  s.ranges.curvature = range_pair(r["curvature"], s.ranges.curvature);
  s.ranges.glass_thickness = range_pair(r["glass_center_thickness"], s.ranges.glass_thickness);
  s.ranges.air_spacing = range_pair(r["air_center_spacing"], s.ranges.air_spacing);
  s.ranges.image_distance = range_pair(r["image_distance"], s.ranges.image_distance);
  s.ranges.index = range_pair(r["refractive_index"], s.ranges.index);
  s.ranges.abbe = range_pair(r["abbe_number"], s.ranges.abbe);

  const Node cons = root["constraints"];
  if (cons.present()) {
    for (std::size_t k = 0; k < cons.size(); ++k) {
      const Node c = cons.at(k);
      c.only({"quantity", "min", "max", "weight"});
      ConstraintSpec cs;
      try {
        cs.quantity = parse_quantity(c["quantity"].string());
      } catch (const ConfigError& e) {
        c["quantity"].fail(e.what());
      }
      cs.bounds = {c["min"].number(-std::numeric_limits<double>::infinity()),
                   c["max"].number(std::numeric_limits<double>::infinity())};
      cs.weight = c["weight"].number();
      if (cs.bounds.lo > cs.bounds.hi) c.fail("min exceeds max");
      if (!(cs.weight >= 0.0)) c["weight"].fail("must be >= 0");
      s.constraints.push_back(cs);
    }
  }

  const Node se = root["search"];
  se.only({"population", "generations", "alpha_lc", "alpha_iq", "alpha_sa", "sa_step", "convergence_threshold",
           "convergence_window", "sa_max_iterations", "parent_fraction", "elite_fraction", "mutation_fraction",
           "mutation_retries", "similarity_distance", "output_loss_ceiling", "output_diversity_distance", "adam"});
  auto& sp = s.search;
  sp.population = se["population"].count(sp.population);
  sp.generations = se["generations"].count(sp.generations);
  sp.alpha_lc = se["alpha_lc"].number(sp.alpha_lc);
  sp.alpha_iq = se["alpha_iq"].number(sp.alpha_iq);
  sp.alpha_sa = se["alpha_sa"].number(sp.alpha_sa);
  sp.sa_step = se["sa_step"].number(sp.sa_step);
  sp.convergence_threshold = se["convergence_threshold"].number(sp.convergence_threshold);
  sp.convergence_window = se["convergence_window"].count(sp.convergence_window);
  sp.sa_max_iterations = se["sa_max_iterations"].count(sp.sa_max_iterations);
  sp.parent_fraction = se["parent_fraction"].number(sp.parent_fraction);
  sp.elite_fraction = se["elite_fraction"].number(sp.elite_fraction);
  sp.mutation_fraction = se["mutation_fraction"].number(sp.mutation_fraction);
  sp.mutation_retries = se["mutation_retries"].count(sp.mutation_retries);
  sp.similarity_distance = se["similarity_distance"].number(sp.similarity_distance);
  sp.output_loss_ceiling = se["output_loss_ceiling"].number(sp.output_loss_ceiling);
  sp.output_diversity_distance = se["output_diversity_distance"].number(sp.output_diversity_distance);
  const Node a = se["adam"];
  a.only({"learning_rate", "floor_ratio", "beta1", "beta2", "epsilon", "budget", "fd_step"});
  sp.adam.learning_rate = a["learning_rate"].number(sp.adam.learning_rate);
  sp.adam.floor_ratio = a["floor_ratio"].number(sp.adam.floor_ratio);
  sp.adam.beta1 = a["beta1"].number(sp.adam.beta1);
  sp.adam.beta2 = a["beta2"].number(sp.adam.beta2);
  sp.adam.epsilon = a["epsilon"].number(sp.adam.epsilon);
  sp.adam.budget = a["budget"].count(sp.adam.budget);
  sp.adam.fd_step = a["fd_step"].number(sp.adam.fd_step);

  const Node e = root["epjo"];
  e.only({"alpha_iq", "alpha1", "alpha2", "learning_rates", "n_o", "n_r", "max_epochs", "depths", "fields",
          "fd_step"});
  EpjoConfig& ec = f.epjo;
  ec.alpha_iq = e["alpha_iq"].number(ec.alpha_iq);
  ec.alpha1 = e["alpha1"].number(ec.alpha1);
  ec.alpha2 = e["alpha2"].number(ec.alpha2);
  const Node lr = e["learning_rates"];
  lr.only({"curvature", "spacing", "index", "abbe"});
  ec.rates.curvature = lr["curvature"].number(ec.rates.curvature);
  ec.rates.spacing = lr["spacing"].number(ec.rates.spacing);
  ec.rates.index = lr["index"].number(ec.rates.index);
  ec.rates.abbe = lr["abbe"].number(ec.rates.abbe);
  ec.n_o = e["n_o"].count(ec.n_o);
  ec.n_r = e["n_r"].count(ec.n_r);
  ec.max_epochs = e["max_epochs"].count(ec.max_epochs);
  ec.depths = e["depths"].numbers(ec.depths);
  ec.fields = static_cast<int>(e["fields"].integer(ec.fields));
  ec.fd_step = e["fd_step"].number(ec.fd_step);

  validated(doc, [&] { s.validate(); });
  validated(doc, [&] {
    try {
      ec.validate();
    } catch (const ConfigError& err) {
      // EpjoConfig messages are "epjo.x ..." or "epjo: ..."; normalize to a path
      std::string m = err.what();
      if (m.rfind("epjo: ", 0) == 0) throw ConfigError(m);
      const auto sp1 = m.find(' ');
      throw ConfigError(m.substr(0, sp1) + ": " + m.substr(sp1 + 1));
    }
  });
  return f;
}

SpecFile load_spec(const std::string& path) { return parse_spec(read_text(path), path); }

// ---------------------------------------------------------------------------

GlassCatalog parse_catalog(std::string_view text, const std::string& origin) {
  const Doc doc = parse_doc(text, origin);
  const Node root(doc, &doc.root, {});
  root.only({"schema_version", "kind", "alpha_n", "alpha_v", "glasses"});
  check_version(root);
  GlassCatalog c;
  c.alpha_n = root["alpha_n"].number(c.alpha_n);
  c.alpha_v = root["alpha_v"].number(c.alpha_v);
  if (!(c.alpha_n >= 0.0)) root["alpha_n"].fail("must be >= 0");
  if (!(c.alpha_v >= 0.0)) root["alpha_v"].fail("must be >= 0");
  const Node g = root["glasses"];
  if (!g.is_array() || g.size() == 0) g.fail("expected a non-empty array");
  for (std::size_t k = 0; k < g.size(); ++k) c.entries.push_back(glass_of(g.at(k)));
  return c;
}

GlassCatalog load_catalog(const std::string& path) { return parse_catalog(read_text(path), path); }

// ---------------------------------------------------------------------------

SensorModel parse_sensor(std::string_view text, const std::string& origin) {
  const Doc doc = parse_doc(text, origin);
  const Node root(doc, &doc.root, {});
  root.only({"schema_version", "kind", "width", "height", "pixel_pitch_um", "channel_response", "noise",
             "wb_gains", "ccm", "gamma", "psf_size", "patch_size", "pupil_rings"});
  check_version(root);
  SensorModel s;
  s.width = static_cast<int>(root["width"].integer(s.width));
  s.height = static_cast<int>(root["height"].integer(s.height));
  s.pixel_pitch_um = root["pixel_pitch_um"].number(s.pixel_pitch_um);
  const Node cr = root["channel_response"];
  cr.only({"r", "g", "b"});
  const char* names[3] = {"r", "g", "b"};
  for (int c = 0; c < 3; ++c) {
    const Node band = cr[names[c]];
    if (!band.present()) continue;
    s.channel_response[c].clear();
    for (std::size_t k = 0; k < band.size(); ++k) {
      const Node e = band.at(k);
      if (!e.is_array() || e.size() != 2) e.fail("expected [wavelength_nm, weight]");
      s.channel_response[c].push_back({e.at(0).number(), e.at(1).number()});
    }
  }
  const Node noise = root["noise"];
  noise.only({"read_sigma", "shot_gain"});
  s.read_sigma = noise["read_sigma"].number(s.read_sigma);
  s.shot_gain = noise["shot_gain"].number(s.shot_gain);
  if (root["wb_gains"].present()) {
    const auto wb = root["wb_gains"].numbers({});
    if (wb.size() != 3) root["wb_gains"].fail("expected 3 values");
    for (int c = 0; c < 3; ++c) s.wb_gains[c] = wb[c];
  }
  const Node ccm = root["ccm"];
  if (ccm.present()) {
    std::vector<double> m;
    for (std::size_t k = 0; k < ccm.size(); ++k) {
      const Node row = ccm.at(k);
      if (row.is_array())
        for (std::size_t q = 0; q < row.size(); ++q) m.push_back(row.at(q).number());
      else
        m.push_back(row.number());
    }
    if (m.size() != 9) ccm.fail("expected a 3x3 matrix");
    for (int k = 0; k < 9; ++k) s.ccm[k] = m[k];
  }
  s.gamma = root["gamma"].number(s.gamma);
  s.psf_size = static_cast<int>(root["psf_size"].integer(s.psf_size));
  s.patch_size = static_cast<int>(root["patch_size"].integer(s.patch_size));
  s.pupil_rings = static_cast<int>(root["pupil_rings"].integer(s.pupil_rings));
  validated(doc, [&] {
    try {
      s.validate();
    } catch (const ConfigError& err) {
      // "sensor.x ..." -> "x: ..."
      std::string m = err.what();
      if (m.rfind("sensor.", 0) == 0) m = m.substr(7);
      const auto cut = m.find_first_of(" :");
      std::string field = m.substr(0, cut);
      std::string rest = m.substr(cut);
      while (!rest.empty() && (rest[0] == ' ' || rest[0] == ':')) rest.erase(0, 1);
      if (auto slash = field.find('/'); slash != std::string::npos) field = field.substr(0, slash);
      throw ConfigError(field + ": " + rest);
    }
  });
  return s;
}

SensorModel load_sensor(const std::string& path) { return parse_sensor(read_text(path), path); }

}  // namespace lensforge
