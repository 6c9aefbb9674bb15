#pragma once

#include <optional>
#include <vector>

#include <torch/torch.h>

#include "phrasegen/nn/transformer.hpp"
#include "phrasegen/symbolic/vocab.hpp"
#include "phrasegen/vae/config.hpp"

namespace phrasegen::vae {

/// Padded tensors for one training or inference batch.
struct TokenBatch {
  torch::Tensor enc_ids;   // [B, m + S]  Q1..Qm then the encoder tokens
  torch::Tensor enc_mask;  // [B, m + S]  true on real tokens
  torch::Tensor dec_in;    // [B, T]      BOS then the target tokens
  torch::Tensor dec_out;   // [B, T]      target tokens then EOS, -100 on padding
};

/// Encoder inputs get the query tokens prepended. `targets` may be empty for
/// encode-only batches. Throws LengthError when a sequence exceeds
/// `max_tokens`.
TokenBatch make_batch(const std::vector<symbolic::TokenSeq>& inputs, const std::vector<symbolic::TokenSeq>& targets,
                      int n_queries, int max_tokens);

struct LossParts {
  torch::Tensor total;
  torch::Tensor ce;   // mean over target tokens
  torch::Tensor kl;   // mean over sequences of the per-sequence KL
  std::int64_t tokens = 0;
  std::int64_t correct = 0;  // teacher-forced argmax hits
};

struct DecodeResult {
  symbolic::TokenSeq tokens;
  /// The length cap was hit before the end token; `tokens` was cut back to
  /// the last complete phrase prefix.
  bool truncated = false;
};

struct DecodeOptions {
  /// Restrict each step to tokens the phrase grammar allows.
  bool constrained = true;
  /// Cap on generated tokens; 0 means max_tokens - 1.
  int max_new_tokens = 0;
};

class PhraseVaeImpl : public torch::nn::Module {
 public:
  explicit PhraseVaeImpl(const VaeConfig& config);

  const VaeConfig& config() const noexcept { return config_; }
  Stage stage() const noexcept { return stage_; }
  void set_stage(Stage stage) noexcept { stage_ = stage; }

  /// Encoder output for every position, [B, S, d].
  torch::Tensor encode_states(const torch::Tensor& ids, const torch::Tensor& mask);
  /// Outputs at the query positions, [B, m, d].
  torch::Tensor query_states(const torch::Tensor& states) const;
  /// Concatenated query states -> (mean, clamped log-variance), each [B, latent].
  std::pair<torch::Tensor, torch::Tensor> moments(const torch::Tensor& query_states);
  /// Latent -> m memory vectors, [B, m, d].
  torch::Tensor expand(const torch::Tensor& z);

  torch::Tensor decoder_logits(const torch::Tensor& dec_in, const torch::Tensor& memory,
                               const torch::Tensor& memory_mask = {});

  /// Teacher-forced loss for the given stage. The VAE stage samples z with
  /// `generator`.
  LossParts loss(const TokenBatch& batch, Stage stage, std::optional<torch::Generator> generator = std::nullopt);

  /// Greedy decoding from decoder memory [B, M, d].
  std::vector<DecodeResult> greedy_decode(const torch::Tensor& memory, const torch::Tensor& memory_mask = {},
                                          const DecodeOptions& options = {});

  torch::nn::Linear bottleneck{nullptr};
  torch::nn::Linear expansion{nullptr};

 private:
  torch::Tensor embed(const torch::Tensor& ids, const torch::Tensor& pos_table);

  VaeConfig config_;
  Stage stage_ = Stage::kFresh;
  torch::nn::Embedding tok_emb_{nullptr};
  torch::Tensor enc_pos_, dec_pos_;
  torch::nn::ModuleList encoder_{nullptr}, decoder_{nullptr};
  torch::nn::LayerNorm enc_norm_{nullptr}, dec_norm_{nullptr};
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(PhraseVae);

}  // namespace phrasegen::vae
