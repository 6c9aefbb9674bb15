#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "phrasegen/ldm/generate.hpp"
#include "phrasegen/ldm/trainer.hpp"
#include "phrasegen/pipeline/corpus.hpp"
#include "phrasegen/pipeline/latent_cache.hpp"
#include "phrasegen/pipeline/manifest.hpp"
#include "phrasegen/pipeline/run_config.hpp"
#include "phrasegen/vae/trainer.hpp"

namespace phrasegen::pipeline {

/// Fixed artifact locations inside a run directory.
struct RunLayout {
  explicit RunLayout(const std::filesystem::path& dir) : root(std::filesystem::absolute(dir)) {}
  std::filesystem::path root;

  std::filesystem::path corpus_dir() const { return root / "corpus"; }
  std::filesystem::path vae_checkpoint(vae::Stage stage) const { return root / "vae" / (vae::to_string(stage) + ".pt"); }
  std::filesystem::path cache_dir() const { return root / "cache"; }
  std::filesystem::path ldm_checkpoint() const { return root / "ldm" / "ldm.pt"; }
  std::filesystem::path generated_dir(const std::string& name) const { return root / "generated" / name; }
  std::filesystem::path eval_dir(const std::string& name) const { return root / "eval" / name; }
  std::filesystem::path interpolate_dir() const { return root / "interpolate"; }
};

PreparedCorpus cmd_prepare(const RunConfig& config);

struct TrainVaeOptions {
  /// First stage to run; later stages follow. Unset runs all three fresh.
  std::optional<vae::Stage> stage;
  /// Checkpoint to continue from; required when `stage` is not pretrain.
  std::filesystem::path from;
  std::function<void(vae::Stage, const vae::EpochLog&)> on_epoch;
};
std::vector<vae::StageResult> cmd_train_vae(const RunConfig& config, const TrainVaeOptions& options = {});

/// `vae_checkpoint` empty takes the run's VAE-stage checkpoint.
LatentCache cmd_cache_latents(const RunConfig& config, const std::filesystem::path& vae_checkpoint = {});

struct TrainLdmOptions {
  int log_every = 100;
  std::function<void(const ldm::LdmLog&)> on_log;
};
ldm::LdmTrainResult cmd_train_ldm(const RunConfig& config, const TrainLdmOptions& options = {});

struct GenerateOptions {
  /// checkpoint empty takes the run's LDM checkpoint; sampler_steps 0 the
  /// config's value. Song k uses seed request.seed + k.
  ldm::GenerationRequest request;
  int count = 1;
  std::string name = "samples";
  std::filesystem::path vae_checkpoint;
  int batch = 8;
};

struct GeneratedSong {
  std::filesystem::path stem;  // <dir>/song_000 without extension
  ldm::GenerationRequest request;
  ldm::LatentSong latents;
  ldm::DecodedSong decoded;
};

/// Writes <stem>.mid, .txt, .latents.bin and .request.json per song. Songs
/// that decode to nothing keep their latents and request, with
/// "empty": true in the request record.
std::vector<GeneratedSong> cmd_generate(const RunConfig& config, const GenerateOptions& options);

struct EvaluateOptions {
  std::string name = "samples";
  std::filesystem::path vae_checkpoint;
  bool write_ssm_images = true;
};

struct MetricReport {
  int generated = 0;
  int references = 0;
  double phrase_fid = 0.0;
  bool fid_regularized = false;
  double srs = 0.0;            // mean over generated songs
  double srs_std = 0.0;
  double reference_srs = 0.0;  // mean over the reference songs
  double mmr = 0.0;            // means of the per-song lists
  double t2r = 0.0;
  double mr = 0.0;
  std::vector<double> per_song_mmr;
  std::vector<double> per_song_t2r;
  /// Fraction of songs whose bar count falls in the requested bucket, over
  /// songs that requested one; -1 when none did.
  double length_accuracy = -1.0;
  std::vector<double> per_song_srs;
  /// Generated phrases longer than the VAE context, left out of FID and SSM.
  int skipped_phrases = 0;
};
void to_json(nlohmann::json& j, const MetricReport& r);
std::string format_report(const MetricReport& r);

MetricReport cmd_evaluate(const RunConfig& config, const EvaluateOptions& options = {});

struct InterpolateOptions {
  std::filesystem::path vae_checkpoint;
  /// Token text of the two end phrases.
  std::string phrase_a;
  std::string phrase_b;
  /// Empty gives 8 evenly spaced values from 0 to 1.
  std::vector<double> alphas;
};

struct InterpolationPoint {
  double alpha = 0.0;
  symbolic::TokenSeq tokens;
  bool grammatical = false;
  bool truncated = false;
};
std::vector<InterpolationPoint> cmd_interpolate(const RunConfig& config, const InterpolateOptions& options);

/// The LDM training set for a cache split: songs that fit the context, with
/// their bucket and (when annotated) structure.
std::vector<ldm::LdmExample> ldm_examples(const LatentCache& cache, const std::string& split, int context,
                                          std::vector<std::string>* skipped = nullptr);

}  // namespace phrasegen::pipeline
