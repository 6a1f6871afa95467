#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace lensforge {

// Record of one CLI run. Timestamps live here and nowhere else, so every
// other output is a pure function of arguments, inputs and seed.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> args);

  // Inputs contribute to the config hash in the order given.
  void add_input(const std::string& path);
  void set_seed(std::uint64_t seed) { seed_ = seed, has_seed_ = true; }
  // Free-form summary line for a stage ("generation 3", "round 1", ...).
  void stage(const std::string& name, const std::string& summary);
  void add_output(const std::string& path);

  std::string config_hash() const;
  // Writes the manifest; throws Error if a listed output is missing.
  void write(const std::string& path) const;

 private:
  std::string command_;
  std::vector<std::string> args_;
  std::uint64_t hash_;
  std::uint64_t seed_ = 0;
  bool has_seed_ = false;
  std::vector<std::pair<std::string, std::string>> stages_;
  std::vector<std::string> outputs_;
  std::chrono::system_clock::time_point start_;
  std::chrono::steady_clock::time_point clock_;
};

}  // namespace lensforge
