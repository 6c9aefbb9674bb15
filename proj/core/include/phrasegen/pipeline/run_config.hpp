#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "phrasegen/ldm/config.hpp"
#include "phrasegen/symbolic/synthetic.hpp"
#include "phrasegen/vae/config.hpp"

namespace phrasegen::pipeline {

struct CorpusSource {
  /// "synthetic" or "midi".
  std::string kind = "synthetic";
  std::filesystem::path midi_dir;
  /// Optional "<id> <layout>" lines; ids are file stems.
  std::filesystem::path annotations;
  bool truncate_long_songs = false;
  std::optional<int> melody_track;

  std::uint64_t synthetic_seed = 1;
  int synthetic_songs = 200;
  /// Layout strings such as "i-4,A-8,B-8,o-4". Empty takes the built-in mix.
  std::vector<std::string> synthetic_layouts;
  std::vector<double> synthetic_weights;

  symbolic::CorpusSpec synthetic_spec() const;
};

struct RunConfig {
  static vae::VaeConfig desk_vae() {
    vae::VaeConfig c;
    c.max_epochs = 30;
    return c;
  }
  static ldm::LdmConfig desk_ldm() {
    ldm::LdmConfig c;
    c.steps = 20000;
    return c;
  }

  CorpusSource corpus;
  double validation_fraction = 0.05;
  /// Expected vocabulary hash; empty accepts the built-in vocabulary.
  std::string vocab_hash;
  std::uint64_t seed = 0;

  /// Desk-scale defaults: at most 30 epochs per VAE stage (max_epochs) and
  /// 20k LDM steps. Keys given in a config file override single fields.
  vae::VaeConfig vae = desk_vae();
  ldm::LdmConfig ldm = desk_ldm();
  int eval_reference_songs = 100;

  std::filesystem::path out_dir = "runs/default";

  /// Throws ConfigError on bad values and MissingArtifactError when a
  /// referenced input path does not exist.
  void validate() const;
  /// Content hash of the canonical JSON form.
  std::string hash() const;
};

void to_json(nlohmann::json& j, const CorpusSource& c);
void from_json(const nlohmann::json& j, CorpusSource& c);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// Reads a JSON run config. Missing keys keep their defaults; unknown keys
/// are rejected.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace phrasegen::pipeline
