#pragma once

#include <filesystem>
#include <string>

namespace fasd {

/// Writes to `path.tmp` and renames over `path`; parent directories are created.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

}  // namespace fasd
