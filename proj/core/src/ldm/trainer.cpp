#include "phrasegen/ldm/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "phrasegen/errors.hpp"
#include "phrasegen/ldm/diffusion.hpp"
#include "phrasegen/nn/transformer.hpp"

namespace phrasegen::ldm {

Conditions visible_conditions(const Conditions& full, ConditioningMode mode) {
  Conditions c;
  if (mode != ConditioningMode::kUnconditional) c.length = full.length;
  if (mode == ConditioningMode::kLengthStructure) c.structure = full.structure;
  return c;
}

LdmTrainResult train_ldm(PhraseLdm& model, const std::vector<LdmExample>& data, const LdmTrainOptions& options) {
  const auto& cfg = model->config();
  if (data.empty()) throw ConfigError("empty LDM training set");
  for (const auto& ex : data) {
    if (ex.song.latents.dim() != 2 || ex.song.latents.size(0) != cfg.context || ex.song.latents.size(1) != cfg.io_channels)
      throw ConfigError("training latents must be [context, io_channels]");
  }
  const int steps = options.steps > 0 ? options.steps : cfg.steps;
  const auto schedule = NoiseSchedule::linear(cfg.diffusion_steps, cfg.beta_start, cfg.beta_end);

  std::mt19937_64 rng(options.seed);
  auto generator = nn::make_generator(options.seed ^ 0x5851f42d4c957f2dULL);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::uniform_int_distribution<int> pick_t(1, cfg.diffusion_steps);
  std::bernoulli_distribution drop(cfg.cond_dropout);
  torch::optim::AdamW optimizer(model->parameters(), torch::optim::AdamWOptions(cfg.lr).weight_decay(cfg.weight_decay));

  LdmTrainResult result;
  model->train();
  double window = 0.0;
  int window_n = 0;
  auto t0 = std::chrono::steady_clock::now();
  for (int step = 1; step <= steps; ++step) {
    std::vector<torch::Tensor> x0s;
    std::vector<std::int64_t> ts;
    std::vector<Conditions> conds;
    for (int b = 0; b < cfg.batch; ++b) {
      const auto& ex = data[pick(rng)];
      x0s.push_back(ex.song.latents);
      ts.push_back(pick_t(rng));
      auto c = visible_conditions(ex.conditions, cfg.mode);
      if (c.length && drop(rng)) c.length.reset();
      if (c.structure && drop(rng)) c.structure.reset();
      conds.push_back(std::move(c));
    }
    auto x0 = torch::stack(x0s);
    auto t = torch::tensor(ts, torch::kInt64);
    auto noise = at::normal(0.0, 1.0, x0.sizes(), generator, x0.options());
    auto x_t = q_sample(schedule, x0, t, noise);
    auto pred = model->forward(x_t, t, make_condition_batch(conds));
    auto loss = torch::mse_loss(pred, noise);

    const double lr = cfg.lr * std::min(1.0, static_cast<double>(step) / std::max(1, cfg.warmup_steps));
    for (auto& group : optimizer.param_groups()) static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
    const double v = loss.item<double>();
    if (!std::isfinite(v)) {
      throw TrainingDivergedError("non-finite LDM loss at step " + std::to_string(step) + " (lr " + std::to_string(lr) + ")");
    }
    optimizer.zero_grad();
    loss.backward();
    if (cfg.grad_clip > 0.0) torch::nn::utils::clip_grad_norm_(model->parameters(), cfg.grad_clip);
    optimizer.step();

    window += v;
    ++window_n;
    if (step % std::max(1, options.log_every) == 0 || step == steps) {
      LdmLog log;
      log.step = step;
      log.loss = window / window_n;
      log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (!options.validation.empty()) {
        log.val_loss = ldm_loss(model, options.validation, options.seed);
        model->train();
      }
      result.history.push_back(log);
      result.final_loss = log.loss;
      if (options.on_log) options.on_log(log);
      window = 0.0;
      window_n = 0;
    }
  }
  model->eval();
  return result;
}

double ldm_loss(PhraseLdm& model, const std::vector<LdmExample>& data, std::uint64_t seed, int n_timesteps) {
  if (data.empty() || n_timesteps < 1) throw ConfigError("ldm_loss needs data and at least one timestep");
  const auto& cfg = model->config();
  const auto schedule = NoiseSchedule::linear(cfg.diffusion_steps, cfg.beta_start, cfg.beta_end);
  auto generator = nn::make_generator(seed);
  torch::NoGradGuard g;
  model->eval();
  double total = 0.0;
  int n = 0;
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(cfg.batch)) {
    const auto end = std::min(data.size(), start + static_cast<std::size_t>(cfg.batch));
    std::vector<torch::Tensor> x0s;
    std::vector<Conditions> conds;
    for (auto i = start; i < end; ++i) {
      x0s.push_back(data[i].song.latents);
      conds.push_back(visible_conditions(data[i].conditions, cfg.mode));
    }
    auto x0 = torch::stack(x0s);
    const auto batch = make_condition_batch(conds);
    for (int k = 1; k <= n_timesteps; ++k) {
      const int t = std::max(1, static_cast<int>(std::lround(static_cast<double>(k) * cfg.diffusion_steps / n_timesteps)));
      auto tt = torch::full({x0.size(0)}, t, torch::kInt64);
      auto noise = at::normal(0.0, 1.0, x0.sizes(), generator, x0.options());
      auto pred = model->forward(q_sample(schedule, x0, tt, noise), tt, batch);
      total += torch::mse_loss(pred, noise).item<double>() * static_cast<double>(x0.size(0));
      n += static_cast<int>(x0.size(0));
    }
  }
  return total / n;
}

}  // namespace phrasegen::ldm
