#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace sugg {

std::uint64_t fnv1a64(std::string_view bytes);
/// 16 lowercase hex digits.
std::string hex64(std::uint64_t value);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);
/// hex64(fnv1a64(file contents)).
std::string file_hash(const std::filesystem::path& path);

}  // namespace sugg
