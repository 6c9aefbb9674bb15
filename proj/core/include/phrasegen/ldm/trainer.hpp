#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "phrasegen/ldm/conditions.hpp"
#include "phrasegen/ldm/latent_song.hpp"
#include "phrasegen/ldm/model.hpp"

namespace phrasegen::ldm {

/// One training song with every condition it could be given; the trainer
/// hides those the conditioning mode does not use.
struct LdmExample {
  LatentSong song;
  Conditions conditions;
};

struct LdmLog {
  int step = 0;
  double loss = 0.0;  // mean over the logging window
  /// Held-out loss; NaN without validation data. Only logged.
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
};

struct LdmTrainOptions {
  int steps = 0;  // 0 takes config().steps
  std::uint64_t seed = 0;
  int log_every = 100;
  std::function<void(const LdmLog&)> on_log;
  std::vector<LdmExample> validation;
};

struct LdmTrainResult {
  std::vector<LdmLog> history;
  double final_loss = 0.0;
};

/// Noise-prediction MSE over all positions (padding included), t uniform in
/// [1, T]. Throws TrainingDivergedError on a non-finite loss.
LdmTrainResult train_ldm(PhraseLdm& model, const std::vector<LdmExample>& data, const LdmTrainOptions& options);

/// Noise-prediction MSE of `data` at `n_timesteps` evenly spaced timesteps,
/// with noise drawn from `seed`; the same arguments give the same value.
double ldm_loss(PhraseLdm& model, const std::vector<LdmExample>& data, std::uint64_t seed, int n_timesteps = 8);

/// Conditions the model actually sees for a training example under `mode`,
/// before condition dropout.
Conditions visible_conditions(const Conditions& full, ConditioningMode mode);

}  // namespace phrasegen::ldm
