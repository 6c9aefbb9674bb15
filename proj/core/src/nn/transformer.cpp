#include "phrasegen/nn/transformer.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include "phrasegen/errors.hpp"

namespace phrasegen::nn {

RotaryEmbedding::RotaryEmbedding(std::int64_t head_dim, std::int64_t max_len, double base) {
  if (head_dim % 2 != 0) throw ConfigError("rotary embedding needs an even head dimension");
  const auto half = head_dim / 2;
  auto inv_freq = torch::pow(base, -torch::arange(0, half, torch::kFloat64) / static_cast<double>(half));
  auto pos = torch::arange(0, max_len, torch::kFloat64);
  auto angles = torch::outer(pos, inv_freq);             // [S, half]
  auto full = torch::cat({angles, angles}, -1);          // [S, D]
  cos_ = full.cos().to(torch::kFloat32);
  sin_ = full.sin().to(torch::kFloat32);
}

torch::Tensor RotaryEmbedding::apply(const torch::Tensor& x) const {
  const auto s = x.size(2);
  if (s > cos_.size(0)) throw LengthError("sequence longer than the rotary table");
  const auto half = x.size(3) / 2;
  auto x1 = x.narrow(3, 0, half);
  auto x2 = x.narrow(3, half, half);
  auto rotated = torch::cat({-x2, x1}, -1);
  auto c = cos_.narrow(0, 0, s);
  auto sn = sin_.narrow(0, 0, s);
  return x * c + rotated * sn;
}

MultiHeadAttentionImpl::MultiHeadAttentionImpl(const AttentionOptions& options) : options_(options) {
  const auto inner = options.n_heads * options.d_head;
  const auto kv_in = options.kv_dim > 0 ? options.kv_dim : options.d_model;
  q = register_module("q", torch::nn::Linear(torch::nn::LinearOptions(options.d_model, inner).bias(false)));
  k = register_module("k", torch::nn::Linear(torch::nn::LinearOptions(kv_in, inner).bias(false)));
  v = register_module("v", torch::nn::Linear(torch::nn::LinearOptions(kv_in, inner).bias(false)));
  o = register_module("o", torch::nn::Linear(torch::nn::LinearOptions(inner, options.d_model).bias(false)));
}

torch::Tensor MultiHeadAttentionImpl::forward(const torch::Tensor& x, const torch::Tensor& source,
                                              const torch::Tensor& key_mask, bool causal,
                                              const RotaryEmbedding* rope) {
  const auto& src = source.defined() ? source : x;
  const auto b = x.size(0);
  const auto h = options_.n_heads;
  const auto dh = options_.d_head;
  auto split = [&](const torch::Tensor& t) { return t.view({b, t.size(1), h, dh}).transpose(1, 2); };
  auto qh = split(q->forward(x));
  auto kh = split(k->forward(src));
  auto vh = split(v->forward(src));
  if (rope != nullptr && rope->defined()) {
    qh = rope->apply(qh);
    kh = rope->apply(kh);
  }
  std::optional<torch::Tensor> mask;
  if (key_mask.defined()) mask = key_mask.view({b, 1, 1, key_mask.size(1)});
  if (causal && mask.has_value()) throw ConfigError("causal attention with a key mask is not supported");
  const double p = is_training() ? options_.dropout : 0.0;
  auto out = at::scaled_dot_product_attention(qh, kh, vh, mask, p, causal);
  out = out.transpose(1, 2).reshape({b, x.size(1), h * dh});
  return o->forward(out);
}

FeedForwardImpl::FeedForwardImpl(std::int64_t d_model, std::int64_t d_ff, Activation activation)
    : activation_(activation) {
  w_in = register_module("w_in", torch::nn::Linear(d_model, d_ff));
  if (activation == Activation::kSwiGlu) {
    w_gate = register_module("w_gate", torch::nn::Linear(d_model, d_ff));
  }
  w_out = register_module("w_out", torch::nn::Linear(d_ff, d_model));
}

torch::Tensor FeedForwardImpl::forward(const torch::Tensor& x) {
  if (activation_ == Activation::kSwiGlu) {
    return w_out->forward(torch::silu(w_gate->forward(x)) * w_in->forward(x));
  }
  return w_out->forward(torch::gelu(w_in->forward(x)));
}

TransformerLayerImpl::TransformerLayerImpl(const LayerOptions& options) : options_(options) {
  const auto d = options.d_model;
  ln_self_ = register_module("ln_self", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
  self_ = register_module("self_attn", MultiHeadAttention(AttentionOptions{d, options.n_heads, options.d_head, 0, options.dropout}));
  if (options.cross_dim > 0) {
    ln_cross_ = register_module("ln_cross", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
    cross_ = register_module(
        "cross_attn", MultiHeadAttention(AttentionOptions{d, options.n_heads, options.d_head, options.cross_dim, options.dropout}));
  }
  ln_ff_ = register_module("ln_ff", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
  ff_ = register_module("ff", FeedForward(d, options.d_ff, options.activation));
  drop_ = register_module("drop", torch::nn::Dropout(options.dropout));
}

torch::Tensor TransformerLayerImpl::forward(const torch::Tensor& x, const torch::Tensor& self_mask, bool causal,
                                            const RotaryEmbedding* rope, const torch::Tensor& memory,
                                            const torch::Tensor& memory_mask) {
  auto h = x + drop_->forward(self_->forward(ln_self_->forward(x), {}, self_mask, causal, rope));
  if (!cross_.is_empty()) {
    if (!memory.defined()) throw ConfigError("cross-attention layer called without memory");
    h = h + drop_->forward(cross_->forward(ln_cross_->forward(h), memory, memory_mask));
  }
  return h + drop_->forward(ff_->forward(ln_ff_->forward(h)));
}

std::int64_t parameter_count(const torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

std::vector<torch::Tensor> snapshot(const torch::nn::Module& module) {
  torch::NoGradGuard guard;
  std::vector<torch::Tensor> out;
  for (const auto& p : module.parameters()) out.push_back(p.detach().clone());
  for (const auto& b : module.buffers()) out.push_back(b.detach().clone());
  return out;
}

void restore(torch::nn::Module& module, const std::vector<torch::Tensor>& values) {
  torch::NoGradGuard guard;
  auto params = module.parameters();
  auto buffers = module.buffers();
  if (values.size() != params.size() + buffers.size()) throw ConfigError("snapshot does not match module");
  std::size_t i = 0;
  for (auto& p : params) p.copy_(values[i++]);
  for (auto& b : buffers) b.copy_(values[i++]);
}

torch::Generator make_generator(std::uint64_t seed) {
  return at::make_generator<at::CPUGeneratorImpl>(seed);
}

}  // namespace phrasegen::nn
