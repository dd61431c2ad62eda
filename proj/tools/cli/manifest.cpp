#include "cli/manifest.hpp"

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iterator>

#include "cli/commands.hpp"

namespace conse::cli {

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a64_hex(bytes);
}

RunManifest::RunManifest(std::string command) : command_(std::move(command)), started_at_(utc_now()) {}

void RunManifest::add_input(const std::string& role, const std::filesystem::path& path) {
  inputs_[role] = std::filesystem::absolute(path).lexically_normal();
}

void RunManifest::add_output(const std::string& role, const std::filesystem::path& path) {
  outputs_[role] = std::filesystem::absolute(path).lexically_normal();
}

nlohmann::json RunManifest::to_json(int exit_status) const {
  auto files = [](const std::map<std::string, std::filesystem::path>& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [role, path] : m) {
      j[role] = {{"path", path.string()}, {"fnv1a64", file_digest(path)}};
    }
    return j;
  };
  return {{"tool", "conse"},
          {"tool_version", kToolVersion},
          {"command", command_},
          {"inputs", files(inputs_)},
          {"outputs", files(outputs_)},
          {"config", config_},
          {"config_hash", config_hash()},
          {"started_at", started_at_},
          {"finished_at", utc_now()},
          {"exit_status", exit_status}};
}

void RunManifest::write(const std::filesystem::path& path, int exit_status) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << to_json(exit_status).dump(2) << '\n';
}

}  // namespace conse::cli
