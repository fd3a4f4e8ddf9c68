#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kgx/error.hpp"

namespace kgx {

inline constexpr const char* kVersion = "0.1.0";

// Flat string key/value configuration. Files carry `key = value` lines with
// `#` comments; command-line `--key value` flags override file values.
class Config {
 public:
  static Config from_file(const std::filesystem::path& file);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void merge_overrides(const Config& overrides);
  bool has(const std::string& key) const { return values_.contains(key); }

  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a64_file(const std::filesystem::path& file);
std::string to_hex(std::uint64_t v);

// Reproducibility record written before any other artifact of a run: the
// fully resolved configuration, input file digests, and planned outputs.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, digest
  std::vector<std::string> artifacts;

  void write(const std::filesystem::path& file) const;
};

}  // namespace kgx
