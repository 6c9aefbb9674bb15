#pragma once

#include <torch/torch.h>

namespace phrasegen::vae {

/// Mean and log-variance of the approximate posterior, [..., latent_dim].
struct LatentMoments {
  torch::Tensor mean;
  torch::Tensor log_var;
};

/// Encoder query outputs for one phrase, [m, d].
struct QueryBundle {
  torch::Tensor q_states;
};

torch::Tensor clamp_log_var(const torch::Tensor& log_var, double lo = -12.0, double hi = 6.0);

/// z = mean + exp(0.5 log_var) * eps with eps ~ N(0, I) drawn from `generator`.
torch::Tensor reparameterize(const LatentMoments& m, torch::Generator generator);
/// Same with caller-provided noise, for gradient checks.
torch::Tensor reparameterize(const LatentMoments& m, const torch::Tensor& eps);

/// KL(q || N(0, I)) summed over the last dimension.
torch::Tensor kl_divergence(const LatentMoments& m);

}  // namespace phrasegen::vae
