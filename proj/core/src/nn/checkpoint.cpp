#include "phrasegen/nn/checkpoint.hpp"

#include "phrasegen/errors.hpp"

namespace phrasegen::nn {

void save_with_meta(const torch::nn::Module& module, const nlohmann::json& meta, const std::filesystem::path& path) {
  torch::serialize::OutputArchive archive;
  module.save(archive);
  archive.write("meta", c10::IValue(meta.dump()));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  archive.save_to(tmp);
  std::filesystem::rename(tmp, path);
}

namespace {

torch::serialize::InputArchive open(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError("checkpoint not found: " + path.string());
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error& e) {
    throw IntegrityError("unreadable checkpoint " + path.string());
  }
  return archive;
}

}  // namespace

nlohmann::json read_meta(const std::filesystem::path& path) {
  auto archive = open(path);
  c10::IValue meta;
  if (!archive.try_read("meta", meta) || !meta.isString()) throw IntegrityError("checkpoint has no meta record: " + path.string());
  try {
    return nlohmann::json::parse(meta.toStringRef());
  } catch (const nlohmann::json::exception&) {
    throw IntegrityError("checkpoint meta is not JSON: " + path.string());
  }
}

void load_weights(torch::nn::Module& module, const std::filesystem::path& path) {
  auto archive = open(path);
  try {
    module.load(archive);
  } catch (const c10::Error& e) {
    throw IntegrityError("checkpoint weights do not match the model: " + path.string());
  }
}

}  // namespace phrasegen::nn
