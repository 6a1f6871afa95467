#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "lensforge/epjo/epjo.hpp"
#include "lensforge/imaging/sensor.hpp"
#include "lensforge/lens/design_spec.hpp"
#include "lensforge/lens/glass.hpp"
#include "lensforge/lens/lens_system.hpp"

namespace lensforge {

// Every file carries "schema_version"; this is the only version understood.
inline constexpr int kSchemaVersion = 1;

// Parse failures and bad values throw ConfigError as
// "<file>:<line>: <field path>: <problem>".
LensSystem load_lens(const std::string& path);
LensSystem parse_lens(std::string_view text, const std::string& origin = "<lens>");
std::string lens_to_json(const LensSystem& lens);
void save_lens(const std::string& path, const LensSystem& lens);

// A design spec file may carry an "epjo" section for joint optimization.
struct SpecFile {
  DesignSpec spec;
  EpjoConfig epjo;
};
SpecFile load_spec(const std::string& path);
SpecFile parse_spec(std::string_view text, const std::string& origin = "<spec>");

GlassCatalog load_catalog(const std::string& path);
GlassCatalog parse_catalog(std::string_view text, const std::string& origin = "<catalog>");

SensorModel load_sensor(const std::string& path);
SensorModel parse_sensor(std::string_view text, const std::string& origin = "<sensor>");

std::string read_text(const std::string& path);
void write_text(const std::string& path, std::string_view text);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace lensforge
