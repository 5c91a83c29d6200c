#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace argue {

/// Writes to a sibling temp file then renames over `path`, so readers never
/// observe a partially written file. Creates parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// JSON text with every floating-point number printed with exactly six
/// decimal places. `indent` < 0 gives compact output.
std::string dump_fixed6(const nlohmann::json& value, int indent = 2);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

}  // namespace argue
