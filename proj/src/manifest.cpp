#include "lensforge/io/manifest.hpp"

#include <ctime>
#include <filesystem>

#include "json.hpp"
#include "lensforge/error.hpp"
#include "lensforge/io/files.hpp"

namespace lensforge {

namespace {

std::string iso_time(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RunManifest::RunManifest(std::string command, std::vector<std::string> args)
    : command_(std::move(command)),
      args_(std::move(args)),
      start_(std::chrono::system_clock::now()),
      clock_(std::chrono::steady_clock::now()) {
  hash_ = fnv1a64(command_);
  for (const auto& a : args_) hash_ = fnv1a64(a + '\0', hash_);
}

void RunManifest::add_input(const std::string& path) { hash_ = fnv1a64(read_text(path), hash_); }

void RunManifest::stage(const std::string& name, const std::string& summary) { stages_.emplace_back(name, summary); }

void RunManifest::add_output(const std::string& path) { outputs_.push_back(path); }

std::string RunManifest::config_hash() const { return hex64(hash_); }

void RunManifest::write(const std::string& path) const {
  nlohmann::ordered_json j;
  j["command"] = command_;
  j["args"] = args_;
  j["config_hash"] = config_hash();
  if (has_seed_) j["seed"] = seed_;
  j["started"] = iso_time(start_);
  j["finished"] = iso_time(std::chrono::system_clock::now());
  j["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_).count();
  auto stages = nlohmann::ordered_json::array();
  for (const auto& [name, summary] : stages_) stages.push_back({{"stage", name}, {"summary", summary}});
  j["stages"] = stages;
  auto outs = nlohmann::ordered_json::array();
  for (const auto& o : outputs_) {
    if (!std::filesystem::exists(o)) throw Error("manifest lists missing output '" + o + "'");
    const std::string bytes = read_text(o);
    outs.push_back({{"path", o}, {"bytes", bytes.size()}, {"fnv1a64", hex64(fnv1a64(bytes))}});
  }
  j["outputs"] = outs;
  write_text(path, j.dump(2) + "\n");
}

}  // namespace lensforge
