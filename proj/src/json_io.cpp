#include "hda/json_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "hda/error.hpp"

namespace hda {

nlohmann::json read_json_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    fail(ErrorKind::missing_artifact, "missing file: " + path.string(), path.string());
  }
  std::ifstream in(path);
  if (!in) fail(ErrorKind::data, "cannot open " + path.string(), path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, path.string() + ": " + e.what(), path.string());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::data, "cannot write " + path.string(), path.string());
  out << text;
  if (!out) fail(ErrorKind::data, "write failed: " + path.string(), path.string());
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace hda
