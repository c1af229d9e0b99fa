#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace aya {

// Hex SHA-256 digest of `bytes`.
std::string sha256_hex(std::string_view bytes);

// Git blob identity: SHA-1 over "blob <size>\0" followed by the content.
std::string git_blob_hash(std::string_view bytes);
std::string git_blob_hash_file(const std::filesystem::path& path);

// 64-bit FNV-1a, used for keyed pseudo-scores and stream derivation.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

} // namespace aya
