#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

namespace retouch {

/// Writes to a sibling temporary file and renames it over `path`, so an
/// existing file is either fully replaced or left untouched.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace retouch
