#include "phrasegen/vae/model.hpp"

#include <algorithm>

#include "phrasegen/errors.hpp"
#include "phrasegen/symbolic/tokenizer.hpp"
#include "phrasegen/vae/latent.hpp"

namespace phrasegen::vae {

using symbolic::TokenSeq;
namespace tok = symbolic::tok;

TokenBatch make_batch(const std::vector<TokenSeq>& inputs, const std::vector<TokenSeq>& targets, int n_queries,
                      int max_tokens) {
  if (inputs.empty()) throw ConfigError("empty batch");
  if (!targets.empty() && targets.size() != inputs.size()) throw ConfigError("inputs and targets differ in count");
  const auto b = static_cast<std::int64_t>(inputs.size());
  std::size_t enc_len = 0;
  for (const auto& s : inputs) enc_len = std::max(enc_len, s.size());
  const auto s_len = static_cast<std::int64_t>(enc_len) + n_queries;
  if (s_len > max_tokens) throw LengthError("encoder input of " + std::to_string(s_len) + " tokens exceeds " + std::to_string(max_tokens));

  TokenBatch out;
  out.enc_ids = torch::full({b, s_len}, tok::kPad, torch::kInt64);
  out.enc_mask = torch::zeros({b, s_len}, torch::kBool);
  auto ids = out.enc_ids.accessor<std::int64_t, 2>();
  auto mask = out.enc_mask.accessor<bool, 2>();
  for (std::int64_t i = 0; i < b; ++i) {
    for (int q = 0; q < n_queries; ++q) {
      ids[i][q] = symbolic::query_token(q);
      mask[i][q] = true;
    }
    const auto& s = inputs[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < s.size(); ++j) {
      ids[i][n_queries + static_cast<std::int64_t>(j)] = s[j];
      mask[i][n_queries + static_cast<std::int64_t>(j)] = true;
    }
  }
  if (targets.empty()) return out;

  std::size_t dec_len = 0;
  for (const auto& t : targets) dec_len = std::max(dec_len, t.size() + 1);
  if (static_cast<int>(dec_len) > max_tokens) throw LengthError("decoder target exceeds " + std::to_string(max_tokens) + " tokens");
  const auto t_len = static_cast<std::int64_t>(dec_len);
  out.dec_in = torch::full({b, t_len}, tok::kPad, torch::kInt64);
  out.dec_out = torch::full({b, t_len}, -100, torch::kInt64);
  auto din = out.dec_in.accessor<std::int64_t, 2>();
  auto dout = out.dec_out.accessor<std::int64_t, 2>();
  for (std::int64_t i = 0; i < b; ++i) {
    const auto& t = targets[static_cast<std::size_t>(i)];
    din[i][0] = tok::kBos;
    for (std::size_t j = 0; j < t.size(); ++j) {
      din[i][static_cast<std::int64_t>(j) + 1] = t[j];
      dout[i][static_cast<std::int64_t>(j)] = t[j];
    }
    dout[i][static_cast<std::int64_t>(t.size())] = tok::kEos;
  }
  return out;
}

PhraseVaeImpl::PhraseVaeImpl(const VaeConfig& config) : config_(config) {
  config_.validate();
  const std::int64_t d = config.d_hidden;
  tok_emb_ = register_module("tok_emb", torch::nn::Embedding(symbolic::tok::kVocabSize, d));
  enc_pos_ = register_parameter("enc_pos", torch::randn({config.max_tokens, d}) * 0.02);
  dec_pos_ = register_parameter("dec_pos", torch::randn({config.max_tokens, d}) * 0.02);
  {
    torch::NoGradGuard g;
    tok_emb_->weight.normal_(0.0, 0.02);
  }
  nn::LayerOptions enc{d, config.n_heads, config.d_head, config.d_ff, nn::Activation::kGelu, 0, config.dropout};
  nn::LayerOptions dec = enc;
  dec.cross_dim = d;
  encoder_ = register_module("encoder", torch::nn::ModuleList());
  for (int i = 0; i < config.enc_layers; ++i) encoder_->push_back(nn::TransformerLayer(enc));
  decoder_ = register_module("decoder", torch::nn::ModuleList());
  for (int i = 0; i < config.dec_layers; ++i) decoder_->push_back(nn::TransformerLayer(dec));
  enc_norm_ = register_module("enc_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
  dec_norm_ = register_module("dec_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
  head_ = register_module("head", torch::nn::Linear(d, symbolic::tok::kVocabSize));
  bottleneck = register_module("bottleneck", torch::nn::Linear(config.n_queries * d, 2 * config.latent_dim));
  expansion = register_module("expansion", torch::nn::Linear(config.latent_dim, config.n_queries * d));
}

torch::Tensor PhraseVaeImpl::embed(const torch::Tensor& ids, const torch::Tensor& pos_table) {
  const auto s = ids.size(1);
  if (s > pos_table.size(0)) throw LengthError("sequence of " + std::to_string(s) + " tokens exceeds the context");
  return tok_emb_->forward(ids) + pos_table.narrow(0, 0, s).unsqueeze(0);
}

torch::Tensor PhraseVaeImpl::encode_states(const torch::Tensor& ids, const torch::Tensor& mask) {
  auto h = embed(ids, enc_pos_);
  for (const auto& layer : *encoder_) h = layer->as<nn::TransformerLayer>()->forward(h, mask);
  return enc_norm_->forward(h);
}

torch::Tensor PhraseVaeImpl::query_states(const torch::Tensor& states) const {
  return states.narrow(1, 0, config_.n_queries);
}

std::pair<torch::Tensor, torch::Tensor> PhraseVaeImpl::moments(const torch::Tensor& q) {
  auto flat = q.reshape({q.size(0), config_.n_queries * config_.d_hidden});
  auto out = bottleneck->forward(flat);
  auto mean = out.narrow(1, 0, config_.latent_dim);
  auto lv = clamp_log_var(out.narrow(1, config_.latent_dim, config_.latent_dim), config_.log_var_min,
                          config_.log_var_max);
  return {mean, lv};
}

torch::Tensor PhraseVaeImpl::expand(const torch::Tensor& z) {
  return expansion->forward(z).view({z.size(0), config_.n_queries, config_.d_hidden});
}

torch::Tensor PhraseVaeImpl::decoder_logits(const torch::Tensor& dec_in, const torch::Tensor& memory,
                                            const torch::Tensor& memory_mask) {
  auto h = embed(dec_in, dec_pos_);
  for (const auto& layer : *decoder_)
    h = layer->as<nn::TransformerLayer>()->forward(h, {}, true, nullptr, memory, memory_mask);
  return head_->forward(dec_norm_->forward(h));
}

LossParts PhraseVaeImpl::loss(const TokenBatch& batch, Stage stage, std::optional<torch::Generator> generator) {
  auto states = encode_states(batch.enc_ids, batch.enc_mask);
  torch::Tensor memory, memory_mask, kl;
  switch (stage) {
    case Stage::kPretrain:
      memory = states;
      memory_mask = batch.enc_mask;
      break;
    case Stage::kAutoencoder:
      memory = query_states(states);
      break;
    case Stage::kVae: {
      auto [mean, lv] = moments(query_states(states));
      LatentMoments m{mean, lv};
      auto z = generator ? reparameterize(m, *generator) : mean;
      kl = kl_divergence(m).mean();
      memory = expand(z);
      break;
    }
    case Stage::kFresh:
      throw ConfigError("no loss for the fresh stage");
  }
  auto logits = decoder_logits(batch.dec_in, memory, memory_mask);
  const auto v = logits.size(-1);
  auto flat_logits = logits.reshape({-1, v});
  auto flat_target = batch.dec_out.reshape({-1});
  LossParts out;
  out.ce = torch::nn::functional::cross_entropy(flat_logits, flat_target,
                                                torch::nn::functional::CrossEntropyFuncOptions().ignore_index(-100));
  out.kl = kl.defined() ? kl : torch::zeros({}, out.ce.options());
  out.total = kl.defined() ? out.ce + config_.kl_weight * kl : out.ce;
  {
    torch::NoGradGuard g;
    auto valid = flat_target.ne(-100);
    out.tokens = valid.sum().item<std::int64_t>();
    out.correct = (flat_logits.argmax(-1).eq(flat_target) & valid).sum().item<std::int64_t>();
  }
  return out;
}

std::vector<DecodeResult> PhraseVaeImpl::greedy_decode(const torch::Tensor& memory, const torch::Tensor& memory_mask,
                                                       const DecodeOptions& options) {
  torch::NoGradGuard no_grad;
  const auto b = memory.size(0);
  const int cap = options.max_new_tokens > 0 ? std::min(options.max_new_tokens, config_.max_tokens - 1)
                                             : config_.max_tokens - 1;
  std::vector<TokenSeq> seqs(static_cast<std::size_t>(b));
  std::vector<symbolic::PhrasePrefix> prefixes(static_cast<std::size_t>(b));
  std::vector<std::size_t> last_complete(static_cast<std::size_t>(b), 0);
  std::vector<bool> done(static_cast<std::size_t>(b), false);
  auto ids = torch::full({b, 1}, tok::kBos, torch::kInt64);
  auto allowed = torch::empty({b, symbolic::tok::kVocabSize}, torch::kBool);

  for (int step = 0; step < cap; ++step) {
    auto h = embed(ids, dec_pos_);
    for (const auto& layer : *decoder_)
      h = layer->as<nn::TransformerLayer>()->forward(h, {}, true, nullptr, memory, memory_mask);
    auto logits = head_->forward(dec_norm_->forward(h.select(1, h.size(1) - 1)));  // [B, V]
    if (options.constrained) {
      auto acc = allowed.accessor<bool, 2>();
      for (std::int64_t i = 0; i < b; ++i) {
        const auto& p = prefixes[static_cast<std::size_t>(i)];
        for (int t = 0; t < symbolic::tok::kVocabSize; ++t) acc[i][t] = p.allows(t);
        acc[i][tok::kEos] = p.complete();
      }
      logits = logits.masked_fill(allowed.logical_not(), -std::numeric_limits<float>::infinity());
    }
    auto next = logits.argmax(-1);
    auto next_acc = next.accessor<std::int64_t, 1>();
    bool all_done = true;
    for (std::int64_t i = 0; i < b; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      if (done[ui]) {
        next_acc[i] = tok::kPad;
        continue;
      }
      const auto t = static_cast<symbolic::TokenId>(next_acc[i]);
      if (t == tok::kEos) {
        done[ui] = true;
        continue;
      }
      seqs[ui].push_back(t);
      if (options.constrained) {
        prefixes[ui].push(t);
        if (prefixes[ui].complete()) last_complete[ui] = seqs[ui].size();
      }
      all_done = false;
    }
    if (all_done) break;
    ids = torch::cat({ids, next.unsqueeze(1)}, 1);
  }

  std::vector<DecodeResult> out(static_cast<std::size_t>(b));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].tokens = std::move(seqs[i]);
    if (!done[i]) {
      out[i].truncated = true;
      if (options.constrained) out[i].tokens.resize(last_complete[i]);
    }
  }
  return out;
}

}  // namespace phrasegen::vae
