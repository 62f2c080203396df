#pragma once

#include <cstdint>
#include <string>

namespace vog {

// Atomic file write: temp file in the target directory, then rename.
void write_file_atomic(const std::string& path, const std::string& bytes);

std::string read_file(const std::string& path);

// FNV-1a over raw bytes; the checksum used throughout manifests.
std::uint64_t fnv1a64(const std::string& bytes);

std::string hex64(std::uint64_t v);
std::uint64_t parse_hex64(const std::string& s);

// Floats rendered at 12 significant digits for CSV output.
std::string format_g12(double v);

}  // namespace vog
