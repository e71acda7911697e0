#pragma once

// File helpers and run manifests.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "annonet/error.hpp"
#include "annonet/gateway.hpp"

namespace annonet {

inline constexpr std::string_view kVersion = "0.1.0";

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to a sibling temp file and renames it over `path`, so readers see
/// either the old or the new content.
inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write to " + tmp.string() + " failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot replace " + path.string() + ": " + ec.message());
  }
}

/// Non-empty lines of a JSONL file, each with its 1-based line number.
inline std::vector<std::pair<std::size_t, nlohmann::json>> read_jsonl(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::pair<std::size_t, nlohmann::json>> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ValidationError(path.string() + ":" + std::to_string(n) + ": invalid JSON");
    out.emplace_back(n, std::move(j));
  }
  return out;
}

/// Reproducibility record written next to every command's outputs.
struct Manifest {
  std::string command;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
  std::vector<std::string> fingerprints;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  /// Output paths are listed but not hashed; inputs are hashed when readable.
  [[nodiscard]] std::string serialize() const {
    nlohmann::ordered_json j;
    j["tool"] = "annonet";
    j["version"] = kVersion;
    j["command"] = command;
    j["config"] = config;
    j["config_hash"] = sha256_hex(config.dump());
    auto ins = nlohmann::ordered_json::array();
    for (const auto& p : inputs) {
      nlohmann::ordered_json e{{"path", p.generic_string()}};
      std::error_code ec;
      if (std::filesystem::is_regular_file(p, ec)) e["sha256"] = sha256_hex(read_file(p));
      ins.push_back(std::move(e));
    }
    j["inputs"] = std::move(ins);
    auto outs = nlohmann::ordered_json::array();
    for (const auto& p : outputs) outs.push_back(p.generic_string());
    j["outputs"] = std::move(outs);
    j["replay_fingerprints"] = fingerprints;
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    return j.dump(2) + "\n";
  }
};

}  // namespace annonet
