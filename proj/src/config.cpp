#include "kgx/config.hpp"

#include <fstream>

namespace kgx {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

Config Config::from_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open config file: " + file.string());
  Config cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ParseError(file.string() + ":" + std::to_string(line_no) +
                       ": expected `key = value`");
    }
    cfg.values_[trim(trimmed.substr(0, eq))] = trim(trimmed.substr(eq + 1));
  }
  return cfg;
}

void Config::merge_overrides(const Config& overrides) {
  for (const auto& [k, v] : overrides.values_) values_[k] = v;
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw ContractError("config key '" + key + "': not a number: " + it->second);
  }
}

std::size_t Config::get_size(const std::string& key, std::size_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw ContractError("config key '" + key + "': not a count: " + it->second);
  }
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  return get_size(key, fallback);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ContractError("config key '" + key + "': not a boolean: " + it->second);
}

std::uint64_t fnv1a64_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot digest input: " + file.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

void RunManifest::write(const std::filesystem::path& file) const {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write manifest: " + file.string());
  out << "command = " << command << '\n';
  out << "version = " << kVersion << '\n';
  for (const auto& [k, v] : config) out << k << " = " << v << '\n';
  for (const auto& [path, digest] : inputs) out << "input " << digest << " " << path << '\n';
  for (const std::string& a : artifacts) out << "artifact = " << a << '\n';
  if (!out) throw IoError("failed writing manifest: " + file.string());
}

}  // namespace kgx
