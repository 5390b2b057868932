#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

namespace hda {

// Reads and parses a JSON file. Missing files raise ErrorKind::missing_artifact,
// parse failures ErrorKind::data; both carry the path.
nlohmann::json read_json_file(const std::filesystem::path& path);

// Writes `j` with 2-space indentation and a trailing newline, creating parent
// directories as needed.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

void write_text_file(const std::filesystem::path& path, const std::string& text);

// Fixed 17-significant-digit rendering; round-trips every finite double.
std::string format_double(double v);

}  // namespace hda
