#include "phrasegen/ldm/diffusion.hpp"

#include <cmath>

#include "phrasegen/errors.hpp"

namespace phrasegen::ldm {

NoiseSchedule NoiseSchedule::linear(int T, double beta_start, double beta_end) {
  if (T < 1) throw ConfigError("diffusion needs at least one step");
  if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end))
    throw ConfigError("beta schedule must satisfy 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.betas.assign(1, 0.0);
  s.alphas.assign(1, 1.0);
  s.alpha_bars.assign(1, 1.0);
  s.timesteps.assign(1, 0);
  for (int t = 1; t <= T; ++t) {
    const double beta = T == 1 ? beta_start : beta_start + (beta_end - beta_start) * (t - 1) / (T - 1);
    s.betas.push_back(beta);
    s.alphas.push_back(1.0 - beta);
    s.alpha_bars.push_back(s.alpha_bars.back() * (1.0 - beta));
    s.timesteps.push_back(t);
  }
  return s;
}

NoiseSchedule NoiseSchedule::respaced(int count) const {
  const int T = steps();
  if (count < 1 || count > T) throw ConfigError("sampling steps must be in [1, T]");
  std::vector<int> keep;
  for (int k = 1; k <= count; ++k) {
    keep.push_back(static_cast<int>(std::lround(static_cast<double>(k) * T / count)));
  }
  NoiseSchedule s;
  s.betas.assign(1, 0.0);
  s.alphas.assign(1, 1.0);
  s.alpha_bars.assign(1, 1.0);
  s.timesteps.assign(1, 0);
  double prev = 1.0;
  for (int t : keep) {
    const double ab = alpha_bars[static_cast<std::size_t>(t)];
    const double beta = 1.0 - ab / prev;
    s.betas.push_back(beta);
    s.alphas.push_back(1.0 - beta);
    s.alpha_bars.push_back(ab);
    s.timesteps.push_back(timesteps[static_cast<std::size_t>(t)]);
    prev = ab;
  }
  return s;
}

double NoiseSchedule::posterior_variance(int t) const {
  const auto u = static_cast<std::size_t>(t);
  return (1.0 - alpha_bars[u - 1]) / (1.0 - alpha_bars[u]) * betas[u];
}

std::pair<double, double> NoiseSchedule::posterior_mean_coefs(int t) const {
  const auto u = static_cast<std::size_t>(t);
  const double c0 = std::sqrt(alpha_bars[u - 1]) * betas[u] / (1.0 - alpha_bars[u]);
  const double ct = std::sqrt(alphas[u]) * (1.0 - alpha_bars[u - 1]) / (1.0 - alpha_bars[u]);
  return {c0, ct};
}

torch::Tensor q_sample(const NoiseSchedule& schedule, const torch::Tensor& x0, const torch::Tensor& t,
                       const torch::Tensor& noise) {
  auto ab = torch::tensor(schedule.alpha_bars, torch::TensorOptions().dtype(torch::kFloat64))
                .index_select(0, t.to(torch::kInt64))
                .to(x0.dtype());
  std::vector<std::int64_t> shape(static_cast<std::size_t>(x0.dim()), 1);
  shape[0] = x0.size(0);
  ab = ab.view(shape);
  return ab.sqrt() * x0 + (1.0 - ab).sqrt() * noise;
}

torch::Tensor q_sample(const NoiseSchedule& schedule, const torch::Tensor& x0, int t, const torch::Tensor& noise) {
  if (t < 0 || t > schedule.steps()) throw ConfigError("timestep out of range");
  const double ab = schedule.alpha_bars[static_cast<std::size_t>(t)];
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * noise;
}

torch::Tensor denoise_step(const NoiseSchedule& schedule, const torch::Tensor& x_t, int i, const torch::Tensor& eps_hat,
                           std::optional<torch::Generator> generator) {
  if (i < 1 || i > schedule.steps()) throw ConfigError("denoise step index out of range");
  if (eps_hat.sizes() != x_t.sizes()) throw ConfigError("noise prediction shape does not match x_t");
  const auto u = static_cast<std::size_t>(i);
  const double beta = schedule.betas[u];
  const double mean_scale = 1.0 / std::sqrt(schedule.alphas[u]);
  const double eps_scale = beta / std::sqrt(1.0 - schedule.alpha_bars[u]);
  auto mean = mean_scale * (x_t - eps_scale * eps_hat);
  if (i == 1) return mean;
  const double sigma = std::sqrt(schedule.posterior_variance(i));
  auto z = generator ? at::normal(0.0, 1.0, x_t.sizes(), *generator, x_t.options()) : torch::randn_like(x_t);
  return mean + sigma * z;
}

torch::Tensor sample(const NoiseSchedule& schedule, const EpsModel& model, std::vector<std::int64_t> shape,
                     torch::Generator generator) {
  torch::NoGradGuard g;
  auto x = at::normal(0.0, 1.0, shape, generator, torch::TensorOptions().dtype(torch::kFloat32));
  for (int i = schedule.steps(); i >= 1; --i) {
    auto t = torch::full({shape[0]}, schedule.timesteps[static_cast<std::size_t>(i)], torch::kInt64);
    x = denoise_step(schedule, x, i, model(x, t), generator);
  }
  return x;
}

}  // namespace phrasegen::ldm
