#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fpdpm::cli {

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

struct ManifestFile {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uint64_t bytes = 0;
};

struct PhaseTime {
  std::string phase;
  double seconds = 0.0;
};

/// Record of one command run, written as manifest.json next to its outputs.
struct RunManifest {
  std::string command;
  std::string config;  // canonical config text
  std::vector<std::uint64_t> seeds;
  std::string version;
  std::vector<PhaseTime> phases;
  std::vector<ManifestFile> files;

  /// Hashes `relative` inside `dir` and appends it to the inventory.
  void add_file(const std::string& dir, const std::string& relative);
  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
  /// Writes manifest.json into `dir`.
  void write(const std::string& dir) const;
  static RunManifest load(const std::string& dir);
};

/// Files whose checksum or size no longer matches; empty when all verify.
std::vector<std::string> verify_manifest(const std::string& dir);

}  // namespace fpdpm::cli
