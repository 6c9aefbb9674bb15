#include "phrasegen/ldm/model.hpp"

#include <cmath>

#include "phrasegen/errors.hpp"
#include "phrasegen/symbolic/vocab.hpp"

namespace phrasegen::ldm {

torch::Tensor timestep_features(const torch::Tensor& t, int dim) {
  const int half = dim / 2;
  auto freqs = torch::exp(-std::log(10000.0) * torch::arange(0, half, torch::kFloat32) / static_cast<double>(half));
  auto args = t.to(torch::kFloat32).unsqueeze(1) * freqs.unsqueeze(0);
  return torch::cat({torch::sin(args), torch::cos(args)}, 1);
}

StructureEncoderImpl::StructureEncoderImpl(const LdmConfig& config) : config_(config) {
  const std::int64_t w = config.cross_attn_dim;
  type_emb_ = register_module("type_emb", torch::nn::Embedding(kNumSectionTypes, w / 2));
  bars_emb_ = register_module("bars_emb", torch::nn::Embedding(symbolic::kMaxBars + 1, w - w / 2));
  pos_ = register_parameter("pos", torch::randn({config.max_sections, w}) * 0.02);
  null_memory = register_parameter("null_memory", torch::randn({1, w}) * 0.02);
  layers_ = register_module("layers", torch::nn::ModuleList());
  nn::LayerOptions lo{w, config.struct_heads, w / config.struct_heads, 4 * w, nn::Activation::kGelu, 0, config.dropout};
  for (int i = 0; i < config.struct_layers; ++i) layers_->push_back(nn::TransformerLayer(lo));
  norm_ = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({w})));
}

std::pair<torch::Tensor, torch::Tensor> StructureEncoderImpl::forward(const ConditionBatch& batch) {
  const auto s = batch.section_types.size(1);
  if (s > config_.max_sections) throw ConfigError("structure prompt has too many sections");
  auto h = torch::cat({type_emb_->forward(batch.section_types), bars_emb_->forward(batch.section_bars)}, -1);
  h = h + pos_.narrow(0, 0, s).unsqueeze(0);
  for (const auto& layer : *layers_) h = layer->as<nn::TransformerLayer>()->forward(h, batch.section_mask);
  h = norm_->forward(h);
  // Null rows: learned memory in slot 0, the mask already exposes only it.
  auto null_rows = batch.structure_null.view({-1, 1, 1});
  auto null_mem = null_memory.unsqueeze(0).expand({h.size(0), s, h.size(2)});
  h = torch::where(null_rows, null_mem, h);
  return {h, batch.section_mask};
}

PhraseLdmImpl::PhraseLdmImpl(const LdmConfig& config) : config_(config) {
  config_.validate();
  const std::int64_t d = config.d_model;
  const std::int64_t tp = config.time_proj_dim;
  in_proj_ = register_module("in_proj", torch::nn::Linear(config.io_channels, d));
  time_mlp_ = register_module("time_mlp", torch::nn::Sequential(torch::nn::Linear(tp, tp), torch::nn::SiLU(),
                                                                torch::nn::Linear(tp, tp)));
  len_emb_ = register_module("len_emb", torch::nn::Embedding(kNullLengthId + 1, tp));
  time_to_hidden_ = register_module("time_to_hidden", torch::nn::Linear(torch::nn::LinearOptions(tp, d).bias(false)));
  len_to_hidden_ = register_module("len_to_hidden", torch::nn::Linear(torch::nn::LinearOptions(tp, d).bias(false)));
  structure_ = register_module("structure", StructureEncoder(config));
  layers_ = register_module("layers", torch::nn::ModuleList());
  nn::LayerOptions lo{d, config.heads, d / config.heads, config.ff_mult * d, nn::Activation::kSwiGlu,
                      config.cross_attn_dim, config.dropout};
  for (int i = 0; i < config.layers; ++i) layers_->push_back(nn::TransformerLayer(lo));
  out_norm_ = register_module("out_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
  out_proj_ = register_module("out_proj", torch::nn::Linear(d, config.io_channels));
  rope_ = nn::RotaryEmbedding(d / config.heads, config.context);
}

torch::Tensor PhraseLdmImpl::time_embedding(const torch::Tensor& t) {
  return time_mlp_->forward(timestep_features(t, config_.time_proj_dim));
}

torch::Tensor PhraseLdmImpl::length_embedding(const torch::Tensor& length_ids) { return len_emb_->forward(length_ids); }

torch::Tensor PhraseLdmImpl::apply_conditions(const torch::Tensor& hidden, const torch::Tensor& t_emb,
                                              const torch::Tensor& len_emb) {
  auto add = time_to_hidden_->forward(t_emb) + len_to_hidden_->forward(len_emb);
  return hidden + add.unsqueeze(1);
}

torch::Tensor PhraseLdmImpl::forward(const torch::Tensor& x_t, const torch::Tensor& t, const ConditionBatch& conds) {
  if (x_t.dim() != 3 || x_t.size(2) != config_.io_channels) throw ConfigError("x_t must be [B, L, io_channels]");
  if (x_t.size(1) > config_.context) throw LengthError("latent sequence longer than the context");
  if (t.size(0) != x_t.size(0) || conds.length_ids.size(0) != x_t.size(0))
    throw ConfigError("batch sizes of x_t, t and conditions differ");
  auto h = in_proj_->forward(x_t);
  h = apply_conditions(h, time_embedding(t), length_embedding(conds.length_ids));
  auto [memory, memory_mask] = structure_->forward(conds);
  for (const auto& layer : *layers_)
    h = layer->as<nn::TransformerLayer>()->forward(h, {}, false, &rope_, memory, memory_mask);
  return out_proj_->forward(out_norm_->forward(h));
}

}  // namespace phrasegen::ldm
