#include "phrasegen/vae/latent.hpp"

namespace phrasegen::vae {

torch::Tensor clamp_log_var(const torch::Tensor& log_var, double lo, double hi) { return log_var.clamp(lo, hi); }

torch::Tensor reparameterize(const LatentMoments& m, const torch::Tensor& eps) {
  return m.mean + torch::exp(0.5 * m.log_var) * eps;
}

torch::Tensor reparameterize(const LatentMoments& m, torch::Generator generator) {
  auto eps = at::normal(0.0, 1.0, m.mean.sizes(), generator, m.mean.options());
  return reparameterize(m, eps);
}

torch::Tensor kl_divergence(const LatentMoments& m) {
  return -0.5 * (1.0 + m.log_var - m.mean.pow(2) - m.log_var.exp()).sum(-1);
}

}  // namespace phrasegen::vae
