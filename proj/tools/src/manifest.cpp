#include "manifest.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "io.hpp"
#include "json.hpp"

namespace fpdpm::cli {

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for hashing");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw IoError("SHA-256 initialization failed");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    const std::streamsize got = in.gcount();
    if (got > 0 && EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(got)) != 1) {
      throw IoError("SHA-256 update failed");
    }
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) throw IoError("SHA-256 finalization failed");
  std::string hex;
  char two[3];
  for (unsigned int k = 0; k < len; ++k) {
    std::snprintf(two, sizeof two, "%02x", md[k]);
    hex += two;
  }
  return hex;
}

void RunManifest::add_file(const std::string& dir, const std::string& relative) {
  const std::filesystem::path p = std::filesystem::path(dir) / relative;
  files.push_back({relative, sha256_file(p.string()), static_cast<std::uint64_t>(std::filesystem::file_size(p))});
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["version"] = version;
  j["seeds"] = seeds;
  j["config"] = config;
  j["phases"] = nlohmann::ordered_json::array();
  for (const auto& p : phases) j["phases"].push_back({{"phase", p.phase}, {"seconds", p.seconds}});
  j["files"] = nlohmann::ordered_json::array();
  for (const auto& f : files) j["files"].push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  RunManifest m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.command = j.at("command").get<std::string>();
    m.version = j.at("version").get<std::string>();
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    m.config = j.at("config").get<std::string>();
    for (const auto& p : j.at("phases")) m.phases.push_back({p.at("phase"), p.at("seconds")});
    for (const auto& f : j.at("files")) m.files.push_back({f.at("path"), f.at("sha256"), f.at("bytes")});
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

void RunManifest::write(const std::string& dir) const {
  write_text((std::filesystem::path(dir) / "manifest.json").string(), to_json());
}

RunManifest RunManifest::load(const std::string& dir) {
  return from_json(read_text((std::filesystem::path(dir) / "manifest.json").string()));
}

std::vector<std::string> verify_manifest(const std::string& dir) {
  const RunManifest m = RunManifest::load(dir);
  std::vector<std::string> bad;
  for (const auto& f : m.files) {
    const std::filesystem::path p = std::filesystem::path(dir) / f.path;
    std::error_code ec;
    if (!std::filesystem::exists(p, ec) || std::filesystem::file_size(p, ec) != f.bytes ||
        sha256_file(p.string()) != f.sha256) {
      bad.push_back(f.path);
    }
  }
  return bad;
}

}  // namespace fpdpm::cli
