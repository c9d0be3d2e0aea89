#pragma once

#include <filesystem>
#include <string>

namespace ldsb {

// Whole-file helpers. Writes go to a sibling temp file and are renamed into
// place so readers never observe a partial file.
std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace ldsb
