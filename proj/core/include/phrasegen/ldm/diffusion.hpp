#pragma once

#include <functional>
#include <vector>

#include <torch/torch.h>

namespace phrasegen::ldm {

/// Discrete DDPM schedule. Index 0 holds the t = 0 identity (beta 0,
/// alpha_bar 1) so that entry t is timestep t for t in [1, T].
struct NoiseSchedule {
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;
  /// Original training timestep of each entry (identity unless respaced).
  std::vector<int> timesteps;

  int steps() const noexcept { return static_cast<int>(betas.size()) - 1; }

  /// beta_t linear from beta_start to beta_end over T steps.
  static NoiseSchedule linear(int T, double beta_start = 1e-4, double beta_end = 0.02);

  /// Keeps `count` timesteps evenly spread over [1, T] (always including T)
  /// and recomputes betas so that alpha_bar is unchanged on those steps.
  NoiseSchedule respaced(int count) const;

  /// beta~_t = (1 - abar_{t-1}) / (1 - abar_t) * beta_t.
  double posterior_variance(int t) const;
  /// Coefficients of x0 and x_t in the posterior mean.
  std::pair<double, double> posterior_mean_coefs(int t) const;
};

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise. `t` is [B] int64 with
/// x0 shaped [B, ...].
torch::Tensor q_sample(const NoiseSchedule& schedule, const torch::Tensor& x0, const torch::Tensor& t,
                       const torch::Tensor& noise);
torch::Tensor q_sample(const NoiseSchedule& schedule, const torch::Tensor& x0, int t, const torch::Tensor& noise);

/// Noise predictor: (x_t, t as [B] int64 in the schedule's training index).
using EpsModel = std::function<torch::Tensor(const torch::Tensor& x_t, const torch::Tensor& t)>;

/// One ancestral step from schedule index `i` to `i - 1`, using predicted
/// noise. The step from i = 1 adds no noise.
torch::Tensor denoise_step(const NoiseSchedule& schedule, const torch::Tensor& x_t, int i, const torch::Tensor& eps_hat,
                           std::optional<torch::Generator> generator);

/// Full reverse chain from pure noise over all schedule entries.
torch::Tensor sample(const NoiseSchedule& schedule, const EpsModel& model, std::vector<std::int64_t> shape,
                     torch::Generator generator);

}  // namespace phrasegen::ldm
