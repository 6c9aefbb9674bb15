#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "phrasegen/vae/corruption.hpp"
#include "phrasegen/vae/model.hpp"

namespace phrasegen::vae {

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double train_ce = 0.0;
  double train_kl = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double seconds = 0.0;
  bool improved = false;
};

struct StageOptions {
  Stage stage = Stage::kPretrain;
  /// 0 takes the model config's values.
  int max_epochs = 0;
  int patience = 0;
  std::uint64_t seed = 0;
  SpanCorruptionParams corruption;
  std::function<void(const EpochLog&)> on_epoch;
};

struct StageResult {
  Stage stage = Stage::kPretrain;
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
  std::vector<EpochLog> history;
};

/// Stage the model must have completed before `stage` can be trained.
Stage required_predecessor(Stage stage);

/// Trains one stage with AdamW, linear warmup, gradient clipping at 1 and
/// early stopping on validation loss. The best weights are restored at the
/// end and the model is tagged with the stage. Rerunning the stage the model
/// is already tagged with resumes it.
///
/// Pretraining feeds span-corrupted inputs and lets the decoder attend to
/// every encoder state; the AE stage gives it only the query states; the
/// VAE stage only the expanded sampled latent, adding kl_weight * KL.
///
/// Throws ConfigError on a stage-order violation and TrainingDivergedError
/// on a non-finite loss.
StageResult train_stage(PhraseVae& model, const std::vector<symbolic::TokenSeq>& train,
                        const std::vector<symbolic::TokenSeq>& val, const StageOptions& options);

}  // namespace phrasegen::vae
