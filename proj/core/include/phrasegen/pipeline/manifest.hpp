#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace phrasegen::pipeline {

struct ArtifactRef {
  std::string path;  // relative to the run directory
  std::string sha256;
};

/// One command outcome. Records are only ever appended.
struct ManifestRecord {
  std::string command;
  std::string stage;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::map<std::string, ArtifactRef> inputs;
  std::map<std::string, ArtifactRef> outputs;
  nlohmann::json metrics = nlohmann::json::object();
  std::vector<std::string> notes;
  std::string time;  // ISO-8601 UTC, filled in by append
};

void to_json(nlohmann::json& j, const ManifestRecord& r);
void from_json(const nlohmann::json& j, ManifestRecord& r);

/// JSON-lines log of every command run in one output directory.
class RunManifest {
 public:
  explicit RunManifest(std::filesystem::path run_dir);

  const std::filesystem::path& run_dir() const noexcept { return run_dir_; }
  std::filesystem::path file() const { return run_dir_ / "manifest.jsonl"; }

  /// Hashes `path` (absolute or relative to the run directory).
  ArtifactRef artifact(const std::filesystem::path& path) const;
  void append(ManifestRecord record) const;
  std::vector<ManifestRecord> records() const;

 private:
  std::filesystem::path run_dir_;
};

/// Exclusive advisory lock on <dir>/.lock for the lifetime of the object.
/// Throws ConfigError when another command holds it.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  int fd_ = -1;
};

/// Writes bytes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace phrasegen::pipeline
