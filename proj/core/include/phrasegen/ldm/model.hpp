#pragma once

#include <torch/torch.h>

#include "phrasegen/ldm/conditions.hpp"
#include "phrasegen/ldm/config.hpp"
#include "phrasegen/nn/transformer.hpp"

namespace phrasegen::ldm {

/// Sinusoidal features of integer timesteps, [B, dim].
torch::Tensor timestep_features(const torch::Tensor& t, int dim);

/// Small transformer over (type, bar count) section embeddings, one memory
/// vector per section at cross_attn_dim width.
class StructureEncoderImpl : public torch::nn::Module {
 public:
  explicit StructureEncoderImpl(const LdmConfig& config);

  /// Returns memory [B, S, cross_attn_dim] and its key mask. Rows flagged
  /// null get the learned null memory in slot 0.
  std::pair<torch::Tensor, torch::Tensor> forward(const ConditionBatch& batch);

  torch::Tensor null_memory;

 private:
  LdmConfig config_;
  torch::nn::Embedding type_emb_{nullptr}, bars_emb_{nullptr};
  torch::Tensor pos_;
  torch::nn::ModuleList layers_{nullptr};
  torch::nn::LayerNorm norm_{nullptr};
};
TORCH_MODULE(StructureEncoder);

/// Encoder-only diffusion transformer predicting the injected noise.
class PhraseLdmImpl : public torch::nn::Module {
 public:
  explicit PhraseLdmImpl(const LdmConfig& config);

  const LdmConfig& config() const noexcept { return config_; }

  /// x_t: [B, L, io_channels]; t: [B] training timesteps.
  torch::Tensor forward(const torch::Tensor& x_t, const torch::Tensor& t, const ConditionBatch& conds);

  /// t_emb and len_emb ([B, 128] each) are projected without bias and added
  /// to every position of hidden [B, L, d].
  torch::Tensor apply_conditions(const torch::Tensor& hidden, const torch::Tensor& t_emb, const torch::Tensor& len_emb);

  torch::Tensor time_embedding(const torch::Tensor& t);
  torch::Tensor length_embedding(const torch::Tensor& length_ids);
  StructureEncoder& structure_encoder() { return structure_; }
  torch::nn::ModuleList& layers() { return layers_; }

 private:
  LdmConfig config_;
  torch::nn::Linear in_proj_{nullptr}, out_proj_{nullptr};
  torch::nn::Sequential time_mlp_{nullptr};
  torch::nn::Embedding len_emb_{nullptr};
  torch::nn::Linear time_to_hidden_{nullptr}, len_to_hidden_{nullptr};
  StructureEncoder structure_{nullptr};
  torch::nn::ModuleList layers_{nullptr};
  torch::nn::LayerNorm out_norm_{nullptr};
  nn::RotaryEmbedding rope_;
};
TORCH_MODULE(PhraseLdm);

}  // namespace phrasegen::ldm
