#pragma once

#include <string>

#include <json.hpp>

namespace phrasegen::ldm {

/// Which conditions a model is trained with. Absent conditions always take
/// the learned null embedding.
enum class ConditioningMode { kUnconditional, kLength, kLengthStructure };

std::string to_string(ConditioningMode mode);
ConditioningMode conditioning_mode_from_string(const std::string& name);

struct LdmConfig {
  int d_model = 512;
  int io_channels = 64;
  int layers = 6;
  int heads = 16;
  int ff_mult = 4;
  /// Latents per song, END_OF_SONG padding included.
  int context = 512;
  int cross_attn_dim = 128;
  int time_proj_dim = 128;
  int struct_layers = 3;
  int struct_heads = 4;
  int max_sections = 64;
  double dropout = 0.0;

  int batch = 128;
  double lr = 5e-4;
  double weight_decay = 0.0;
  int warmup_steps = 1000;
  int steps = 200000;
  double grad_clip = 1.0;
  ConditioningMode mode = ConditioningMode::kLength;
  /// Probability of replacing each available condition with its null
  /// embedding during training.
  double cond_dropout = 0.1;

  int diffusion_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int sampling_steps = 250;

  /// Lifts the d_model >= 2 * io_channels rule, only for the width ablation.
  bool allow_narrow_width = false;

  void validate() const;
  friend bool operator==(const LdmConfig&, const LdmConfig&) = default;
};

void to_json(nlohmann::json& j, const LdmConfig& c);
void from_json(const nlohmann::json& j, LdmConfig& c);

}  // namespace phrasegen::ldm
