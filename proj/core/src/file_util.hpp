#pragma once

#include <filesystem>
#include <string>

namespace harmony::detail {

// Writes via a sibling temporary file and a rename. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

std::string read_file(const std::filesystem::path& path);

// printf-style formatting of one double.
std::string format_double(const char* format, double value);

}  // namespace harmony::detail
