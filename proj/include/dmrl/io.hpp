#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dmrl/errors.hpp"
#include "dmrl/rng.hpp"

namespace dmrl {

// Shortest round-trip decimal form; stable across runs on one platform.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// Write-temp-then-rename so partially written artifacts never appear under
// their final name.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open for writing: " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open for reading: " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::uint64_t hash_bytes(const std::string& bytes) { return fnv1a64(bytes); }

inline std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string hash_file_hex(const std::filesystem::path& path) {
  return hash_hex(hash_bytes(read_file(path)));
}

}  // namespace dmrl
