// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace stratmem::text {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split_lines(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);

/// 64-bit FNV-1a, optionally seeded. Stable across platforms; used for
/// cache keys and config digests, never for security.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0);
std::string hex64(std::uint64_t v);

/// Maps (seed, key) to a uniform double in [0, 1).
double unit_hash(std::uint64_t seed, std::string_view key);

std::string read_file(const std::filesystem::path& path);
/// Writes through a sibling temp file and renames, so readers never see a
/// partially written document.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace stratmem::text
