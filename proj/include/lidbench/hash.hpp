#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace lidbench {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

/// Writes via a temporary sibling and rename, so readers never observe a
/// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace lidbench
