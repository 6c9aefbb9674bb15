#include "phrasegen/pipeline/manifest.hpp"

#include <chrono>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include "phrasegen/errors.hpp"
#include "phrasegen/hashing.hpp"

namespace phrasegen::pipeline {
namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

void to_json(nlohmann::json& j, const ManifestRecord& r) {
  auto refs = [](const std::map<std::string, ArtifactRef>& m) {
    nlohmann::json o = nlohmann::json::object();
    for (const auto& [k, a] : m) o[k] = {{"path", a.path}, {"sha256", a.sha256}};
    return o;
  };
  j = nlohmann::json{{"command", r.command},     {"stage", r.stage},   {"seed", r.seed},
                     {"config_hash", r.config_hash}, {"inputs", refs(r.inputs)}, {"outputs", refs(r.outputs)},
                     {"metrics", r.metrics},     {"notes", r.notes},   {"time", r.time}};
}

void from_json(const nlohmann::json& j, ManifestRecord& r) {
  auto refs = [](const nlohmann::json& o) {
    std::map<std::string, ArtifactRef> m;
    for (const auto& [k, a] : o.items()) m[k] = ArtifactRef{a.at("path").get<std::string>(), a.at("sha256").get<std::string>()};
    return m;
  };
  r.command = j.at("command").get<std::string>();
  r.stage = j.value("stage", "");
  r.seed = j.value("seed", std::uint64_t{0});
  r.config_hash = j.value("config_hash", "");
  r.inputs = refs(j.value("inputs", nlohmann::json::object()));
  r.outputs = refs(j.value("outputs", nlohmann::json::object()));
  r.metrics = j.value("metrics", nlohmann::json::object());
  r.notes = j.value("notes", std::vector<std::string>{});
  r.time = j.value("time", "");
}

RunManifest::RunManifest(std::filesystem::path run_dir) : run_dir_(std::move(run_dir)) {}

ArtifactRef RunManifest::artifact(const std::filesystem::path& path) const {
  const auto full = path.is_absolute() ? path : run_dir_ / path;
  if (!std::filesystem::exists(full)) throw MissingArtifactError("artifact '" + full.string() + "' does not exist");
  return ArtifactRef{std::filesystem::relative(full, run_dir_).generic_string(), sha256_file(full)};
}

void RunManifest::append(ManifestRecord record) const {
  record.time = utc_now();
  std::filesystem::create_directories(run_dir_);
  std::ofstream out(file(), std::ios::app);
  if (!out) throw ConfigError("cannot append to " + file().string());
  out << nlohmann::json(record).dump() << '\n';
}

std::vector<ManifestRecord> RunManifest::records() const {
  std::vector<ManifestRecord> out;
  std::ifstream in(file());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<ManifestRecord>());
    } catch (const nlohmann::json::exception& e) {
      throw IntegrityError("corrupt manifest line in " + file().string() + ": " + e.what());
    }
  }
  return out;
}

DirectoryLock::DirectoryLock(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto path = dir / ".lock";
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw ConfigError("cannot open lock file " + path.string() + ": " + std::strerror(errno));
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw ConfigError("another phrasegen command is running in " + dir.string());
  }
}

DirectoryLock::~DirectoryLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ConfigError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace phrasegen::pipeline
