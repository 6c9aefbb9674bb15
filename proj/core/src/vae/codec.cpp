#include "phrasegen/vae/codec.hpp"

#include <algorithm>

#include "phrasegen/errors.hpp"
#include "phrasegen/nn/checkpoint.hpp"

namespace phrasegen::vae {

using symbolic::TokenSeq;

PhraseCodec::PhraseCodec(PhraseVae model, int batch_size) : model_(std::move(model)), batch_size_(batch_size) {
  if (batch_size_ < 1) throw ConfigError("batch size must be positive");
  model_->eval();
}

QueryBundle PhraseCodec::encode(const TokenSeq& tokens) {
  torch::NoGradGuard g;
  const auto batch = make_batch({tokens}, {}, config().n_queries, config().max_tokens);
  auto states = model_->encode_states(batch.enc_ids, batch.enc_mask);
  return QueryBundle{model_->query_states(states).squeeze(0).clone()};
}

LatentMoments PhraseCodec::bottleneck_project(const QueryBundle& bundle) {
  torch::NoGradGuard g;
  auto [mean, lv] = model_->moments(bundle.q_states.unsqueeze(0));
  return LatentMoments{mean.squeeze(0), lv.squeeze(0)};
}

LatentMoments PhraseCodec::moments(const std::vector<TokenSeq>& phrases) {
  torch::NoGradGuard g;
  std::vector<torch::Tensor> means, lvs;
  for (std::size_t start = 0; start < phrases.size(); start += static_cast<std::size_t>(batch_size_)) {
    const auto end = std::min(phrases.size(), start + static_cast<std::size_t>(batch_size_));
    std::vector<TokenSeq> chunk(phrases.begin() + static_cast<std::ptrdiff_t>(start),
                                phrases.begin() + static_cast<std::ptrdiff_t>(end));
    const auto batch = make_batch(chunk, {}, config().n_queries, config().max_tokens);
    auto [mean, lv] = model_->moments(model_->query_states(model_->encode_states(batch.enc_ids, batch.enc_mask)));
    means.push_back(mean);
    lvs.push_back(lv);
  }
  if (means.empty()) {
    auto empty = torch::zeros({0, config().latent_dim});
    return LatentMoments{empty, empty.clone()};
  }
  return LatentMoments{torch::cat(means), torch::cat(lvs)};
}

torch::Tensor PhraseCodec::encode_mean(const std::vector<TokenSeq>& phrases) { return moments(phrases).mean; }

std::vector<DecodeResult> PhraseCodec::decode_batch(const torch::Tensor& z, const DecodeOptions& options) {
  torch::NoGradGuard g;
  if (z.dim() != 2 || z.size(1) != config().latent_dim) throw ConfigError("latent batch must be [N, latent_dim]");
  if (!torch::isfinite(z).all().item<bool>()) throw ConfigError("latent contains non-finite values");
  std::vector<DecodeResult> out;
  for (std::int64_t start = 0; start < z.size(0); start += batch_size_) {
    const auto n = std::min<std::int64_t>(batch_size_, z.size(0) - start);
    auto part = model_->greedy_decode(model_->expand(z.narrow(0, start, n).to(torch::kFloat32)), {}, options);
    for (auto& r : part) out.push_back(std::move(r));
  }
  return out;
}

DecodeResult PhraseCodec::decode(const torch::Tensor& z, const DecodeOptions& options) {
  return decode_batch(z.reshape({1, -1}), options).front();
}

std::vector<DecodeResult> PhraseCodec::reconstruct(const std::vector<TokenSeq>& phrases, const DecodeOptions& options) {
  torch::NoGradGuard g;
  std::vector<DecodeResult> out;
  for (std::size_t start = 0; start < phrases.size(); start += static_cast<std::size_t>(batch_size_)) {
    const auto end = std::min(phrases.size(), start + static_cast<std::size_t>(batch_size_));
    std::vector<TokenSeq> chunk(phrases.begin() + static_cast<std::ptrdiff_t>(start),
                                phrases.begin() + static_cast<std::ptrdiff_t>(end));
    const auto batch = make_batch(chunk, {}, config().n_queries, config().max_tokens);
    auto states = model_->encode_states(batch.enc_ids, batch.enc_mask);
    torch::Tensor memory, mask;
    switch (model_->stage()) {
      case Stage::kFresh:
      case Stage::kPretrain:
        memory = states;
        mask = batch.enc_mask;
        break;
      case Stage::kAutoencoder:
        memory = model_->query_states(states);
        break;
      case Stage::kVae:
        memory = model_->expand(model_->moments(model_->query_states(states)).first);
        break;
    }
    for (auto& r : model_->greedy_decode(memory, mask, options)) out.push_back(std::move(r));
  }
  return out;
}

std::vector<DecodeResult> PhraseCodec::interpolate(const torch::Tensor& z1, const torch::Tensor& z2,
                                                   const std::vector<double>& alphas, const DecodeOptions& options) {
  std::vector<torch::Tensor> rows;
  for (double a : alphas) rows.push_back((1.0 - a) * z1.reshape({-1}) + a * z2.reshape({-1}));
  if (rows.empty()) return {};
  return decode_batch(torch::stack(rows), options);
}

void save_vae(const PhraseVae& model, const std::filesystem::path& path) {
  nlohmann::json meta;
  meta["kind"] = "phrase_vae";
  meta["config"] = model->config();
  meta["stage"] = to_string(model->stage());
  meta["vocab_hash"] = symbolic::vocab_hash();
  nn::save_with_meta(*model, meta, path);
}

PhraseVae load_vae(const std::filesystem::path& path) {
  const auto meta = nn::read_meta(path);
  if (meta.value("kind", "") != "phrase_vae") throw IntegrityError(path.string() + " is not a PhraseVAE checkpoint");
  if (meta.value("vocab_hash", "") != symbolic::vocab_hash())
    throw IntegrityError("vocabulary hash mismatch in " + path.string());
  PhraseVae model(meta.at("config").get<VaeConfig>());
  nn::load_weights(*model, path);
  model->set_stage(stage_from_string(meta.at("stage").get<std::string>()));
  return model;
}

}  // namespace phrasegen::vae
