#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vprune {

// FNV-1a 64-bit; used for config/artifact fingerprints in manifests.
std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);
std::string file_hash_hex(const std::filesystem::path& path);

// Fixed 9-significant-digit formatting; keeps text artifacts byte-stable.
std::string g9(double v);

}  // namespace vprune
