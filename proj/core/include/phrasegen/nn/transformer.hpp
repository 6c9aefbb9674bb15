#pragma once

#include <cstdint>

#include <torch/torch.h>

namespace phrasegen::nn {

/// Rotary position embedding over the last (head) dimension, using the
/// split-halves pairing.
class RotaryEmbedding {
 public:
  RotaryEmbedding() = default;
  RotaryEmbedding(std::int64_t head_dim, std::int64_t max_len, double base = 10000.0);

  /// x: [B, H, S, D] with S <= max_len.
  torch::Tensor apply(const torch::Tensor& x) const;
  bool defined() const noexcept { return cos_.defined(); }

 private:
  torch::Tensor cos_, sin_;
};

struct AttentionOptions {
  std::int64_t d_model = 512;
  std::int64_t n_heads = 8;
  std::int64_t d_head = 64;
  /// Width of the key/value source; 0 means d_model (self-attention).
  std::int64_t kv_dim = 0;
  double dropout = 0.0;
};

class MultiHeadAttentionImpl : public torch::nn::Module {
 public:
  explicit MultiHeadAttentionImpl(const AttentionOptions& options);

  /// `source` undefined means self-attention. `key_mask` is a bool tensor
  /// [B, S_kv] with true on keys that may be attended.
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& source = {}, const torch::Tensor& key_mask = {},
                        bool causal = false, const RotaryEmbedding* rope = nullptr);

  const AttentionOptions& options() const noexcept { return options_; }

  torch::nn::Linear q{nullptr}, k{nullptr}, v{nullptr}, o{nullptr};

 private:
  AttentionOptions options_;
};
TORCH_MODULE(MultiHeadAttention);

enum class Activation { kGelu, kSwiGlu };

class FeedForwardImpl : public torch::nn::Module {
 public:
  FeedForwardImpl(std::int64_t d_model, std::int64_t d_ff, Activation activation);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  Activation activation_;
  torch::nn::Linear w_in{nullptr}, w_gate{nullptr}, w_out{nullptr};
};
TORCH_MODULE(FeedForward);

struct LayerOptions {
  std::int64_t d_model = 512;
  std::int64_t n_heads = 8;
  std::int64_t d_head = 64;
  std::int64_t d_ff = 2048;
  Activation activation = Activation::kGelu;
  /// Width of the cross-attention memory; 0 disables cross-attention.
  std::int64_t cross_dim = 0;
  double dropout = 0.0;
};

/// Pre-LayerNorm transformer layer: self-attention, optional
/// cross-attention, feed-forward, each on a residual branch.
class TransformerLayerImpl : public torch::nn::Module {
 public:
  explicit TransformerLayerImpl(const LayerOptions& options);

  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& self_mask = {}, bool causal = false,
                        const RotaryEmbedding* rope = nullptr, const torch::Tensor& memory = {},
                        const torch::Tensor& memory_mask = {});

  bool has_cross_attention() const noexcept { return !cross_.is_empty(); }
  MultiHeadAttention& cross_attention() { return cross_; }

 private:
  LayerOptions options_;
  torch::nn::LayerNorm ln_self_{nullptr}, ln_cross_{nullptr}, ln_ff_{nullptr};
  MultiHeadAttention self_{nullptr}, cross_{nullptr};
  FeedForward ff_{nullptr};
  torch::nn::Dropout drop_{nullptr};
};
TORCH_MODULE(TransformerLayer);

std::int64_t parameter_count(const torch::nn::Module& module);

/// Deep copy of all parameters and buffers, detached.
std::vector<torch::Tensor> snapshot(const torch::nn::Module& module);
void restore(torch::nn::Module& module, const std::vector<torch::Tensor>& values);

/// CPU generator seeded deterministically.
torch::Generator make_generator(std::uint64_t seed);

}  // namespace phrasegen::nn
