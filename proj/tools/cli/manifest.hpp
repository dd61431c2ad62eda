#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace conse::cli {

std::string fnv1a64_hex(std::string_view bytes);
std::string file_digest(const std::filesystem::path& path);

/// Provenance record written alongside every command's output.
class RunManifest {
 public:
  explicit RunManifest(std::string command);

  void add_input(const std::string& role, const std::filesystem::path& path);
  void add_output(const std::string& role, const std::filesystem::path& path);
  void set_config(nlohmann::json config) { config_ = std::move(config); }

  /// Hash of the canonical (key-sorted, compact) config serialization.
  std::string config_hash() const { return fnv1a64_hex(config_.dump()); }

  nlohmann::json to_json(int exit_status) const;
  void write(const std::filesystem::path& path, int exit_status) const;

 private:
  std::string command_;
  std::string started_at_;
  nlohmann::json config_ = nlohmann::json::object();
  std::map<std::string, std::filesystem::path> inputs_;
  std::map<std::string, std::filesystem::path> outputs_;
};

}  // namespace conse::cli
