#include "phrasegen/vae/config.hpp"

#include "phrasegen/errors.hpp"

namespace phrasegen::vae {

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::kFresh: return "fresh";
    case Stage::kPretrain: return "pretrain";
    case Stage::kAutoencoder: return "ae";
    case Stage::kVae: return "vae";
  }
  return "?";
}

Stage stage_from_string(const std::string& name) {
  if (name == "fresh") return Stage::kFresh;
  if (name == "pretrain") return Stage::kPretrain;
  if (name == "ae") return Stage::kAutoencoder;
  if (name == "vae") return Stage::kVae;
  throw ConfigError("unknown VAE stage '" + name + "'");
}

void VaeConfig::validate() const {
  if (latent_dim != 32 && latent_dim != 64 && latent_dim != 128)
    throw ConfigError("latent_dim must be 32, 64 or 128");
  if (n_queries < 1 || n_queries > 4) throw ConfigError("n_queries must be in [1, 4]");
  if (kl_weight < 0.0) throw ConfigError("kl_weight must be non-negative");
  if (enc_layers < 1 || dec_layers < 1 || d_hidden < 1 || n_heads < 1 || d_head < 1 || d_ff < 1)
    throw ConfigError("VAE sizes must be positive");
  if (max_tokens <= n_queries + 1) throw ConfigError("max_tokens too small");
  if (batch < 1 || lr <= 0.0 || early_stop_patience < 1 || max_epochs < 1)
    throw ConfigError("invalid VAE training settings");
  if (!(log_var_min < log_var_max)) throw ConfigError("log_var clamp range is empty");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
}

#define PHRASEGEN_VAE_FIELDS(X)                                                                                  \
  X(enc_layers) X(dec_layers) X(d_hidden) X(n_heads) X(d_head) X(d_ff) X(n_queries) X(latent_dim) X(max_tokens) \
  X(dropout) X(kl_weight) X(batch) X(lr) X(weight_decay) X(warmup_steps) X(early_stop_patience) X(max_epochs)    \
  X(log_var_min) X(log_var_max)

void to_json(nlohmann::json& j, const VaeConfig& c) {
  j = nlohmann::json::object();
#define X(f) j[#f] = c.f;
  PHRASEGEN_VAE_FIELDS(X)
#undef X
}

void from_json(const nlohmann::json& j, VaeConfig& c) {
  c = VaeConfig{};
  for (const auto& [key, _] : j.items()) {
    bool known = false;
#define X(f) known = known || key == #f;
    PHRASEGEN_VAE_FIELDS(X)
#undef X
    if (!known) throw ConfigError("unknown VAE config key '" + key + "'");
  }
#define X(f) \
  if (j.contains(#f)) j.at(#f).get_to(c.f);
  PHRASEGEN_VAE_FIELDS(X)
#undef X
}

}  // namespace phrasegen::vae
