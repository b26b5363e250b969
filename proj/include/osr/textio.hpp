#pragma once

#include <cstdio>
#include <filesystem>
#include <string>

namespace osr {

// 17 significant digits: lossless decimal round-trip for IEEE doubles.
inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string format_g6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Write contents to a temp file in the target directory, then rename into
// place so a failed writer never leaves a half-written output.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace osr
