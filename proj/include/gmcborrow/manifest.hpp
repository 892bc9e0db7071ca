#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace gmc {

// FNV-1a, 64-bit.
std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed = 14695981039346656037ull);
std::uint64_t fnv1a64(const std::string& s);

// Digest of a file's bytes; throws ValidationError when unreadable.
std::uint64_t file_digest(const std::string& path);

// Provenance record emitted with every run. The run id is a digest of command,
// configuration, inputs, and seed, so identical runs share an id and any input
// or config change produces a new one. Timestamps are informational only.
struct RunManifest {
  std::string command;
  std::string version;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;  // sorted key=value pairs
  std::vector<std::pair<std::string, std::uint64_t>> inputs;  // (path, digest)
  std::string started;   // UTC ISO 8601
  std::string finished;

  std::uint64_t config_digest() const;
  std::string run_id() const;  // 16 hex digits
  void set_config_sorted(std::vector<std::pair<std::string, std::string>> entries);
  void add_input(const std::string& path);
};

std::string utc_timestamp();

void write_manifest_json(const std::string& path, const RunManifest& m);

}  // namespace gmc
