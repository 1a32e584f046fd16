#pragma once

// Binary container for learned parameters.
//
// Layout (little-endian host order):
//   8 bytes  magic "SRDMPAR\0"
//   u32      format version
//   str      kind ("vae" | "denoiser")
//   str      fingerprint (hex FNV-1a of the canonical config JSON)
//   str      metadata JSON (contains "config" plus kind-specific fields)
//   u64      parameter count, followed by that many f64 values
// where str = u64 length + bytes.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "srdm/error.hpp"

namespace srdm {

inline constexpr std::uint32_t kParamsFormatVersion = 1;

/// 64-bit FNV-1a of `bytes`, as 16 hex digits.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Fingerprint of a configuration object; nlohmann::json dumps keys sorted.
inline std::string config_fingerprint(const nlohmann::json& config) { return fnv1a_hex(config.dump()); }

struct ParamsBlob {
  std::string kind;
  std::string fingerprint;
  nlohmann::json metadata;
  std::vector<double> values;
};

namespace params_detail {

inline void put_u64(std::ofstream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
inline void put_str(std::ofstream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::uint64_t get_u64(std::ifstream& in, const std::string& path) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 8)) throw ParseError("truncated params file '" + path + "'");
  return v;
}
inline std::string get_str(std::ifstream& in, const std::string& path) {
  const auto n = get_u64(in, path);
  if (n > (1ULL << 30)) throw ParseError("corrupt params file '" + path + "'");
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw ParseError("truncated params file '" + path + "'");
  }
  return s;
}

}  // namespace params_detail

inline void save_params(const std::string& path, const ParamsBlob& blob) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write("SRDMPAR", 8);
  const std::uint32_t version = kParamsFormatVersion;
  out.write(reinterpret_cast<const char*>(&version), 4);
  params_detail::put_str(out, blob.kind);
  params_detail::put_str(out, blob.fingerprint);
  params_detail::put_str(out, blob.metadata.dump());
  params_detail::put_u64(out, blob.values.size());
  out.write(reinterpret_cast<const char*>(blob.values.data()),
            static_cast<std::streamsize>(blob.values.size() * sizeof(double)));
  if (!out) throw IoError("write failed for '" + path + "'");
}

/**
 * @brief Reads a params file and checks magic, version, kind and that the
 *        stored fingerprint matches the embedded config.
 */
inline ParamsBlob load_params(const std::string& path, const std::string& expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, "SRDMPAR", 8) != 0) {
    throw ParseError("'" + path + "' is not an srdm params file");
  }
  std::uint32_t version = 0;
  if (!in.read(reinterpret_cast<char*>(&version), 4)) throw ParseError("truncated params file '" + path + "'");
  if (version != kParamsFormatVersion) {
    throw ConfigError("unsupported params format version " + std::to_string(version));
  }
  ParamsBlob blob;
  blob.kind = params_detail::get_str(in, path);
  if (blob.kind != expected_kind) {
    throw ConfigError("'" + path + "' holds " + blob.kind + " params, expected " + expected_kind);
  }
  blob.fingerprint = params_detail::get_str(in, path);
  try {
    blob.metadata = nlohmann::json::parse(params_detail::get_str(in, path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("params metadata: " + std::string(e.what()));
  }
  if (!blob.metadata.contains("config") || config_fingerprint(blob.metadata["config"]) != blob.fingerprint) {
    throw ConfigError("fingerprint mismatch in '" + path + "'");
  }
  const auto n = params_detail::get_u64(in, path);
  if (n > (1ULL << 28)) throw ParseError("corrupt params file '" + path + "'");
  blob.values.resize(n);
  if (!in.read(reinterpret_cast<char*>(blob.values.data()), static_cast<std::streamsize>(n * sizeof(double)))) {
    throw ParseError("truncated params file '" + path + "'");
  }
  return blob;
}

}  // namespace srdm
