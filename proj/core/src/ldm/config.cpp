#include "phrasegen/ldm/config.hpp"

#include "phrasegen/errors.hpp"

namespace phrasegen::ldm {

std::string to_string(ConditioningMode mode) {
  switch (mode) {
    case ConditioningMode::kUnconditional: return "unconditional";
    case ConditioningMode::kLength: return "length";
    case ConditioningMode::kLengthStructure: return "length+structure";
  }
  return "?";
}

ConditioningMode conditioning_mode_from_string(const std::string& name) {
  if (name == "unconditional") return ConditioningMode::kUnconditional;
  if (name == "length") return ConditioningMode::kLength;
  if (name == "length+structure") return ConditioningMode::kLengthStructure;
  throw ConfigError("unknown conditioning mode '" + name + "'");
}

void LdmConfig::validate() const {
  if (d_model < 1 || io_channels < 1 || layers < 1 || heads < 1 || ff_mult < 1 || context < 2)
    throw ConfigError("LDM sizes must be positive");
  if (d_model % heads != 0) throw ConfigError("d_model must be divisible by heads");
  if ((d_model / heads) % 2 != 0) throw ConfigError("rotary embedding needs an even head width");
  if (cross_attn_dim % struct_heads != 0) throw ConfigError("cross_attn_dim must be divisible by struct_heads");
  if (!allow_narrow_width && d_model < 2 * io_channels)
    throw ConfigError("d_model must be at least twice io_channels");
  if (diffusion_steps < 1 || sampling_steps < 1 || sampling_steps > diffusion_steps)
    throw ConfigError("sampling_steps must be in [1, diffusion_steps]");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) throw ConfigError("invalid beta schedule");
  if (cond_dropout < 0.0 || cond_dropout > 1.0) throw ConfigError("cond_dropout must be in [0, 1]");
  if (batch < 1 || lr <= 0.0 || steps < 0) throw ConfigError("invalid LDM training settings");
}

#define PHRASEGEN_LDM_FIELDS(X)                                                                                     \
  X(d_model) X(io_channels) X(layers) X(heads) X(ff_mult) X(context) X(cross_attn_dim) X(time_proj_dim)            \
  X(struct_layers) X(struct_heads) X(max_sections) X(dropout) X(batch) X(lr) X(weight_decay) X(warmup_steps)        \
  X(steps) X(grad_clip) X(cond_dropout) X(diffusion_steps) X(beta_start) X(beta_end) X(sampling_steps)             \
  X(allow_narrow_width)

void to_json(nlohmann::json& j, const LdmConfig& c) {
  j = nlohmann::json::object();
#define X(f) j[#f] = c.f;
  PHRASEGEN_LDM_FIELDS(X)
#undef X
  j["mode"] = to_string(c.mode);
}

void from_json(const nlohmann::json& j, LdmConfig& c) {
  c = LdmConfig{};
  for (const auto& [key, _] : j.items()) {
    bool known = key == "mode";
#define X(f) known = known || key == #f;
    PHRASEGEN_LDM_FIELDS(X)
#undef X
    if (!known) throw ConfigError("unknown LDM config key '" + key + "'");
  }
#define X(f) \
  if (j.contains(#f)) j.at(#f).get_to(c.f);
  PHRASEGEN_LDM_FIELDS(X)
#undef X
  if (j.contains("mode")) c.mode = conditioning_mode_from_string(j.at("mode").get<std::string>());
}

}  // namespace phrasegen::ldm
