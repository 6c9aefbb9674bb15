#include "phrasegen/pipeline/run_config.hpp"

#include <fstream>
#include <set>

#include "phrasegen/errors.hpp"
#include "phrasegen/hashing.hpp"
#include "phrasegen/symbolic/song.hpp"
#include "phrasegen/symbolic/vocab.hpp"

namespace phrasegen::pipeline {
namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown " + where + " key '" + key + "'");
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

symbolic::CorpusSpec CorpusSource::synthetic_spec() const {
  if (synthetic_layouts.empty()) return symbolic::default_corpus_spec();
  symbolic::CorpusSpec spec;
  for (const auto& l : synthetic_layouts) spec.layouts.push_back(symbolic::parse_layout(l));
  spec.weights = synthetic_weights;
  return spec;
}

void RunConfig::validate() const {
  if (corpus.kind == "midi") {
    if (!std::filesystem::is_directory(corpus.midi_dir))
      throw MissingArtifactError("MIDI directory '" + corpus.midi_dir.string() + "' does not exist");
    if (!corpus.annotations.empty() && !std::filesystem::exists(corpus.annotations))
      throw MissingArtifactError("annotation file '" + corpus.annotations.string() + "' does not exist");
  } else if (corpus.kind == "synthetic") {
    if (corpus.synthetic_songs < 1) throw ConfigError("synthetic corpus needs at least one song");
    if (!corpus.synthetic_weights.empty() && corpus.synthetic_weights.size() != corpus.synthetic_layouts.size())
      throw ConfigError("synthetic_weights must match synthetic_layouts");
    corpus.synthetic_spec();
  } else {
    throw ConfigError("corpus kind must be 'synthetic' or 'midi', got '" + corpus.kind + "'");
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ConfigError("validation_fraction must be in (0, 1)");
  if (!vocab_hash.empty() && vocab_hash != symbolic::vocab_hash())
    throw IntegrityError("config expects vocabulary " + vocab_hash + " but this build has " + symbolic::vocab_hash());
  vae.validate();
  ldm.validate();
  if (ldm.io_channels != vae.latent_dim) throw ConfigError("ldm.io_channels must equal vae.latent_dim");
  if (ldm.steps < 1 || eval_reference_songs < 1) throw ConfigError("ldm.steps and eval_reference_songs must be positive");
  if (out_dir.empty()) throw ConfigError("out_dir is empty");
}

std::string RunConfig::hash() const { return sha256_hex(nlohmann::json(*this).dump()); }

void to_json(nlohmann::json& j, const CorpusSource& c) {
  j = nlohmann::json{{"kind", c.kind},
                     {"midi_dir", c.midi_dir.string()},
                     {"annotations", c.annotations.string()},
                     {"truncate_long_songs", c.truncate_long_songs},
                     {"synthetic_seed", c.synthetic_seed},
                     {"synthetic_songs", c.synthetic_songs},
                     {"synthetic_layouts", c.synthetic_layouts},
                     {"synthetic_weights", c.synthetic_weights}};
  j["melody_track"] = c.melody_track ? nlohmann::json(*c.melody_track) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, CorpusSource& c) {
  reject_unknown(j,
                 {"kind", "midi_dir", "annotations", "truncate_long_songs", "melody_track", "synthetic_seed",
                  "synthetic_songs", "synthetic_layouts", "synthetic_weights"},
                 "corpus");
  c = CorpusSource{};
  read(j, "kind", c.kind);
  if (j.contains("midi_dir")) c.midi_dir = j.at("midi_dir").get<std::string>();
  if (j.contains("annotations")) c.annotations = j.at("annotations").get<std::string>();
  read(j, "truncate_long_songs", c.truncate_long_songs);
  if (j.contains("melody_track") && !j.at("melody_track").is_null()) c.melody_track = j.at("melody_track").get<int>();
  read(j, "synthetic_seed", c.synthetic_seed);
  read(j, "synthetic_songs", c.synthetic_songs);
  read(j, "synthetic_layouts", c.synthetic_layouts);
  read(j, "synthetic_weights", c.synthetic_weights);
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"corpus", c.corpus},
                     {"validation_fraction", c.validation_fraction},
                     {"vocab_hash", c.vocab_hash},
                     {"seed", c.seed},
                     {"vae", c.vae},
                     {"ldm", c.ldm},
                     {"eval_reference_songs", c.eval_reference_songs},
                     {"out_dir", c.out_dir.string()}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  reject_unknown(j,
                 {"corpus", "validation_fraction", "vocab_hash", "seed", "vae", "ldm",
                  "eval_reference_songs", "out_dir"},
                 "run config");
  c = RunConfig{};
  read(j, "corpus", c.corpus);
  read(j, "validation_fraction", c.validation_fraction);
  read(j, "vocab_hash", c.vocab_hash);
  read(j, "seed", c.seed);
  if (j.contains("vae")) {
    auto merged = nlohmann::json(c.vae);
    merged.update(j.at("vae"));
    c.vae = merged.get<vae::VaeConfig>();
  }
  if (j.contains("ldm")) {
    auto merged = nlohmann::json(c.ldm);
    merged.update(j.at("ldm"));
    c.ldm = merged.get<ldm::LdmConfig>();
  }
  read(j, "eval_reference_songs", c.eval_reference_songs);
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("config file '" + path.string() + "' not found");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return j.get<RunConfig>();
}

}  // namespace phrasegen::pipeline
