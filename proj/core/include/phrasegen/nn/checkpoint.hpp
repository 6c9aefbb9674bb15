#pragma once

#include <filesystem>

#include <json.hpp>
#include <torch/torch.h>

namespace phrasegen::nn {

/// Writes the module's parameters and buffers together with a JSON meta
/// record into one archive file.
void save_with_meta(const torch::nn::Module& module, const nlohmann::json& meta, const std::filesystem::path& path);

/// Throws MissingArtifactError when the file is absent and IntegrityError
/// when it has no meta record.
nlohmann::json read_meta(const std::filesystem::path& path);

void load_weights(torch::nn::Module& module, const std::filesystem::path& path);

}  // namespace phrasegen::nn
