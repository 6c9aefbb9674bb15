#pragma once

#include <filesystem>
#include <vector>

#include "phrasegen/vae/latent.hpp"
#include "phrasegen/vae/model.hpp"

namespace phrasegen::vae {

/// Eval-mode front end of a trained PhraseVae. All calls are deterministic.
class PhraseCodec {
 public:
  explicit PhraseCodec(PhraseVae model, int batch_size = 256);

  PhraseVae& model() noexcept { return model_; }
  const VaeConfig& config() const noexcept { return model_->config(); }

  /// Query states for one phrase. Throws LengthError when over the context.
  QueryBundle encode(const symbolic::TokenSeq& tokens);
  LatentMoments bottleneck_project(const QueryBundle& bundle);

  /// Posterior moments for many phrases, [N, latent] each.
  LatentMoments moments(const std::vector<symbolic::TokenSeq>& phrases);
  /// Posterior means, the deterministic latents used for caching.
  torch::Tensor encode_mean(const std::vector<symbolic::TokenSeq>& phrases);

  DecodeResult decode(const torch::Tensor& z, const DecodeOptions& options = {});
  /// z: [N, latent].
  std::vector<DecodeResult> decode_batch(const torch::Tensor& z, const DecodeOptions& options = {});

  /// Round trip through the bottleneck of the model's current stage:
  /// all encoder states after pretraining, query states after the AE stage,
  /// the posterior mean after the VAE stage.
  std::vector<DecodeResult> reconstruct(const std::vector<symbolic::TokenSeq>& phrases,
                                        const DecodeOptions& options = {});

  /// Decodes (1 - a) z1 + a z2 for each a.
  std::vector<DecodeResult> interpolate(const torch::Tensor& z1, const torch::Tensor& z2,
                                        const std::vector<double>& alphas, const DecodeOptions& options = {});

 private:
  PhraseVae model_;
  int batch_size_;
};

void save_vae(const PhraseVae& model, const std::filesystem::path& path);
/// Verifies the checkpoint kind and vocabulary hash (IntegrityError).
PhraseVae load_vae(const std::filesystem::path& path);

}  // namespace phrasegen::vae
