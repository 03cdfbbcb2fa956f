// SPDX-License-Identifier: Apache-2.0
#include "stratmem/text.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <system_error>

#include "stratmem/error.hpp"

namespace stratmem {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kSchemaViolation: return "schema violation";
    case ErrorCode::kNotNormalized: return "embedding not normalized";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kZeroVector: return "zero vector";
    case ErrorCode::kMissingFile: return "missing file";
    case ErrorCode::kMalformedDocument: return "malformed document";
    case ErrorCode::kVersionMismatch: return "schema version mismatch";
    case ErrorCode::kUnknownTemplate: return "unknown template";
    case ErrorCode::kMissingSlot: return "missing slot";
    case ErrorCode::kUnscriptedRequest: return "unscripted request";
    case ErrorCode::kTransport: return "transport failure";
    case ErrorCode::kBudgetExceeded: return "budget exceeded";
    case ErrorCode::kEnvironmentFault: return "environment fault";
    case ErrorCode::kInvalidConfig: return "invalid config";
    case ErrorCode::kRunAborted: return "run aborted";
  }
  return "error";
}

namespace text {

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t nl = s.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(s.substr(start));
      break;
    }
    std::string_view line = s.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  return lines;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ (seed * 0x9e3779b97f4a7c15ULL);
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
    v >>= 4;
  }
  return out;
}

double unit_hash(std::uint64_t seed, std::string_view key) {
  // splitmix64 finalizer over the FNV hash for better low-bit mixing
  std::uint64_t z = fnv1a(key, seed) + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::kInvalidArgument, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace text
}  // namespace stratmem
