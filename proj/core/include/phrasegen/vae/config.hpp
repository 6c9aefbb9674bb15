#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace phrasegen::vae {

/// Last completed training stage of a model.
enum class Stage { kFresh, kPretrain, kAutoencoder, kVae };

std::string to_string(Stage stage);
Stage stage_from_string(const std::string& name);

struct VaeConfig {
  int enc_layers = 3;
  int dec_layers = 3;
  int d_hidden = 512;
  int n_heads = 6;
  int d_head = 64;
  int d_ff = 1024;
  int n_queries = 4;
  int latent_dim = 64;
  /// Longest encoder input (queries included) and decoder input.
  int max_tokens = 256;
  double dropout = 0.1;

  double kl_weight = 0.01;
  int batch = 128;
  double lr = 1e-4;
  double weight_decay = 0.01;
  int warmup_steps = 1000;
  int early_stop_patience = 20;
  int max_epochs = 200;

  double log_var_min = -12.0;
  double log_var_max = 6.0;

  /// Throws ConfigError on an unsupported combination.
  void validate() const;

  friend bool operator==(const VaeConfig&, const VaeConfig&) = default;
};

void to_json(nlohmann::json& j, const VaeConfig& c);
void from_json(const nlohmann::json& j, VaeConfig& c);

}  // namespace phrasegen::vae
