#include "gmcborrow/manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gmcborrow/errors.hpp"
#include "gmcborrow/version.hpp"

namespace gmc {

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::uint64_t file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file for digest: " + path);
  std::uint64_t h = 14695981039346656037ull;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    if (got > 0) h = fnv1a64(buf, static_cast<std::size_t>(got), h);
  }
  return h;
}

namespace {

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::uint64_t RunManifest::config_digest() const {
  std::string flat;
  for (const auto& [k, v] : config) {
    flat += k;
    flat += '=';
    flat += v;
    flat += '\n';
  }
  return fnv1a64(flat);
}

std::string RunManifest::run_id() const {
  std::string flat = command;
  flat += '\n';
  flat += hex16(config_digest());
  flat += '\n';
  flat += hex16(seed);
  for (const auto& [path, digest] : inputs) {
    flat += '\n';
    flat += hex16(digest);
  }
  return hex16(fnv1a64(flat));
}

void RunManifest::set_config_sorted(std::vector<std::pair<std::string, std::string>> entries) {
  std::sort(entries.begin(), entries.end());
  config = std::move(entries);
}

void RunManifest::add_input(const std::string& path) { inputs.emplace_back(path, file_digest(path)); }

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest_json(const std::string& path, const RunManifest& m) {
  nlohmann::json j;
  j["command"] = m.command;
  j["version"] = m.version.empty() ? std::string(kVersion) : m.version;
  j["seed"] = m.seed;
  j["run_id"] = m.run_id();
  j["config_digest"] = hex16(m.config_digest());
  nlohmann::json cfg = nlohmann::json::object();
  for (const auto& [k, v] : m.config) cfg[k] = v;
  j["config"] = cfg;
  nlohmann::json in = nlohmann::json::array();
  for (const auto& [p, d] : m.inputs) in.push_back({{"path", p}, {"digest", hex16(d)}});
  j["inputs"] = in;
  j["started"] = m.started;
  j["finished"] = m.finished;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write manifest: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace gmc
