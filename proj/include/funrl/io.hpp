#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace funrl::io {

/// Writes through a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
void append_line(const std::filesystem::path& path, std::string_view line);
/// Throws std::runtime_error if the file cannot be opened.
std::string read_file(const std::filesystem::path& path);
/// Non-empty lines; trailing '\r' stripped.
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace funrl::io
