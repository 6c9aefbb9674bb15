#include "phrasegen/vae/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "phrasegen/errors.hpp"
#include "phrasegen/nn/transformer.hpp"

namespace phrasegen::vae {

using symbolic::TokenSeq;

Stage required_predecessor(Stage stage) {
  switch (stage) {
    case Stage::kPretrain: return Stage::kFresh;
    case Stage::kAutoencoder: return Stage::kPretrain;
    case Stage::kVae: return Stage::kAutoencoder;
    case Stage::kFresh: break;
  }
  throw ConfigError("the fresh stage cannot be trained");
}

namespace {

struct Totals {
  double loss = 0.0, ce = 0.0, kl = 0.0;
  std::int64_t tokens = 0, correct = 0, batches = 0;
};

std::vector<std::pair<std::vector<TokenSeq>, std::vector<TokenSeq>>> build_batches(
    const std::vector<TokenSeq>& data, const std::vector<std::size_t>& order, int batch_size, Stage stage,
    std::mt19937_64& rng, const SpanCorruptionParams& corruption) {
  std::vector<std::pair<std::vector<TokenSeq>, std::vector<TokenSeq>>> out;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<TokenSeq> inputs, targets;
    for (std::size_t i = start; i < end; ++i) {
      const auto& seq = data[order[i]];
      if (stage == Stage::kPretrain) {
        auto pair = corrupt_spans(seq, rng, corruption);
        inputs.push_back(std::move(pair.input));
        targets.push_back(std::move(pair.target));
      } else {
        inputs.push_back(seq);
        targets.push_back(seq);
      }
    }
    out.emplace_back(std::move(inputs), std::move(targets));
  }
  return out;
}

void check_finite(const torch::Tensor& loss, Stage stage, int epoch, int step, double lr) {
  const double v = loss.item<double>();
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << "non-finite loss in stage " << to_string(stage) << " at epoch " << epoch << ", step " << step
        << " (lr " << lr << ")";
    throw TrainingDivergedError(msg.str());
  }
}

}  // namespace

StageResult train_stage(PhraseVae& model, const std::vector<TokenSeq>& train, const std::vector<TokenSeq>& val,
                        const StageOptions& options) {
  const auto& cfg = model->config();
  if (options.stage == Stage::kFresh) throw ConfigError("the fresh stage cannot be trained");
  if (model->stage() != options.stage && model->stage() != required_predecessor(options.stage)) {
    throw ConfigError("stage order violation: cannot train '" + to_string(options.stage) + "' after '" +
                      to_string(model->stage()) + "'");
  }
  if (train.empty()) throw ConfigError("empty training set");
  const int max_epochs = options.max_epochs > 0 ? options.max_epochs : cfg.max_epochs;
  const int patience = options.patience > 0 ? options.patience : cfg.early_stop_patience;

  std::mt19937_64 rng(options.seed);
  auto generator = nn::make_generator(options.seed ^ 0x9e3779b97f4a7c15ULL);
  torch::optim::AdamW optimizer(model->parameters(),
                                torch::optim::AdamWOptions(cfg.lr).weight_decay(cfg.weight_decay));

  // Validation corruptions are drawn once so that the loss is comparable
  // across epochs.
  std::vector<std::size_t> val_order(val.size());
  std::iota(val_order.begin(), val_order.end(), 0);
  std::mt19937_64 val_rng(options.seed + 1);
  const auto val_batches = build_batches(val, val_order, cfg.batch, options.stage, val_rng, options.corruption);

  StageResult result;
  result.stage = options.stage;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<torch::Tensor> best = nn::snapshot(*model);
  int since_best = 0;
  int step = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    const auto batches = build_batches(train, order, cfg.batch, options.stage, rng, options.corruption);
    model->train();
    Totals tr;
    for (const auto& [inputs, targets] : batches) {
      ++step;
      const double lr = cfg.lr * std::min(1.0, static_cast<double>(step) / std::max(1, cfg.warmup_steps));
      for (auto& group : optimizer.param_groups()) static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
      const auto batch = make_batch(inputs, targets, cfg.n_queries, cfg.max_tokens);
      auto parts = model->loss(batch, options.stage, generator);
      check_finite(parts.total, options.stage, epoch, step, lr);
      optimizer.zero_grad();
      parts.total.backward();
      torch::nn::utils::clip_grad_norm_(model->parameters(), 1.0);
      optimizer.step();
      tr.loss += parts.total.item<double>();
      tr.ce += parts.ce.item<double>();
      tr.kl += parts.kl.item<double>();
      tr.tokens += parts.tokens;
      tr.correct += parts.correct;
      ++tr.batches;
    }

    model->eval();
    Totals va;
    {
      torch::NoGradGuard g;
      for (const auto& [inputs, targets] : val_batches) {
        const auto batch = make_batch(inputs, targets, cfg.n_queries, cfg.max_tokens);
        auto parts = model->loss(batch, options.stage);
        va.loss += parts.total.item<double>() * static_cast<double>(inputs.size());
        va.tokens += parts.tokens;
        va.correct += parts.correct;
        va.batches += static_cast<std::int64_t>(inputs.size());
      }
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = tr.loss / static_cast<double>(tr.batches);
    log.train_ce = tr.ce / static_cast<double>(tr.batches);
    log.train_kl = tr.kl / static_cast<double>(tr.batches);
    log.train_accuracy = tr.tokens ? static_cast<double>(tr.correct) / static_cast<double>(tr.tokens) : 0.0;
    // Without a validation set the training loss drives early stopping.
    log.val_loss = va.batches ? va.loss / static_cast<double>(va.batches) : log.train_loss;
    log.val_accuracy = va.tokens ? static_cast<double>(va.correct) / static_cast<double>(va.tokens) : log.train_accuracy;
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.improved = log.val_loss < result.best_val_loss;
    if (log.improved) {
      result.best_val_loss = log.val_loss;
      result.best_epoch = epoch;
      best = nn::snapshot(*model);
      since_best = 0;
    } else {
      ++since_best;
    }
    result.history.push_back(log);
    result.epochs_run = epoch;
    if (options.on_epoch) options.on_epoch(log);
    if (since_best >= patience) {
      result.stopped_early = true;
      break;
    }
  }

  nn::restore(*model, best);
  model->eval();
  model->set_stage(options.stage);
  return result;
}

}  // namespace phrasegen::vae
