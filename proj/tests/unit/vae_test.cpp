#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "phrasegen/errors.hpp"
#include "phrasegen/nn/checkpoint.hpp"
#include "phrasegen/symbolic/tokenizer.hpp"
#include "phrasegen/vae/codec.hpp"
#include "phrasegen/vae/corruption.hpp"
#include "phrasegen/vae/latent.hpp"
#include "phrasegen/vae/trainer.hpp"
#include "unit/generators.hpp"

using namespace phrasegen;
using namespace phrasegen::vae;
using symbolic::TokenSeq;
namespace tok = symbolic::tok;

namespace {

VaeConfig tiny_config() {
  VaeConfig c;
  c.enc_layers = 1;
  c.dec_layers = 1;
  c.d_hidden = 32;
  c.n_heads = 2;
  c.d_head = 16;
  c.d_ff = 64;
  c.max_tokens = 48;
  c.dropout = 0.0;
  c.batch = 16;
  c.lr = 3e-3;
  c.warmup_steps = 10;
  return c;
}

std::vector<TokenSeq> random_phrases(std::uint64_t seed, int n, int max_notes) {
  std::mt19937_64 rng(seed);
  std::vector<TokenSeq> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(symbolic::tokenize_phrase(test_support::random_phrase(rng, static_cast<int>(rng() % 129), max_notes)));
  }
  return out;
}

// Simpson's rule on a wide grid for KL(N(mu, s^2) || N(0, 1)).
double kl_by_integration(double mu, double log_var) {
  const double s = std::exp(0.5 * log_var);
  const double lo = mu - 12.0 * s, hi = mu + 12.0 * s;
  const int n = 20000;
  const double h = (hi - lo) / n;
  auto f = [&](double x) {
    const double zq = (x - mu) / s;
    const double log_q = -0.5 * zq * zq - std::log(s) - 0.5 * std::log(2.0 * M_PI);
    const double log_p = -0.5 * x * x - 0.5 * std::log(2.0 * M_PI);
    return std::exp(log_q) * (log_q - log_p);
  };
  double sum = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) sum += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

}  // namespace

TEST(VaeConfig, DefaultsAndValidation) {
  VaeConfig c;
  EXPECT_EQ(c.enc_layers, 3);
  EXPECT_EQ(c.d_hidden, 512);
  EXPECT_EQ(c.n_heads, 6);
  EXPECT_EQ(c.n_queries, 4);
  EXPECT_EQ(c.latent_dim, 64);
  EXPECT_DOUBLE_EQ(c.kl_weight, 0.01);
  EXPECT_NO_THROW(c.validate());
  c.latent_dim = 48;
  EXPECT_THROW(c.validate(), ConfigError);
  c = VaeConfig{};
  c.n_queries = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = VaeConfig{};
  c.kl_weight = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(VaeConfig, JsonRoundTripAndUnknownKeys) {
  VaeConfig c = tiny_config();
  nlohmann::json j = c;
  EXPECT_EQ(j.get<VaeConfig>(), c);
  j["bogus"] = 1;
  EXPECT_THROW(j.get<VaeConfig>(), ConfigError);
}

TEST(Corruption, ZeroRatioIsIdentity) {
  std::mt19937_64 rng(1);
  const auto seq = random_phrases(1, 1, 8)[0];
  const auto out = corrupt_spans(seq, rng, {0.0, 3.0, 2});
  EXPECT_EQ(out.input, seq);
  EXPECT_EQ(out.target, seq);
}

TEST(Corruption, DeterministicGivenSeed) {
  const auto seq = random_phrases(2, 1, 10)[0];
  std::mt19937_64 a(42), b(42);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(corrupt_spans(seq, a).input, corrupt_spans(seq, b).input);
}

TEST(Corruption, ShortSequencesUntouched) {
  std::mt19937_64 rng(3);
  const TokenSeq one{tok::kEndOfBar};
  EXPECT_EQ(corrupt_spans(one, rng).input, one);
}

TEST(Corruption, SentinelsReplaceRunsAndTargetIsOriginal) {
  std::mt19937_64 rng(5);
  for (const auto& seq : random_phrases(5, 200, 12)) {
    const auto out = corrupt_spans(seq, rng);
    EXPECT_EQ(out.target, seq);
    int sentinels = 0;
    for (auto t : out.input) sentinels += symbolic::kind_of(t) == symbolic::TokenKind::kSentinel;
    EXPECT_EQ(out.input.size(), seq.size() - out.masked + sentinels);
    // Unmasked tokens keep their relative order.
    std::size_t j = 0;
    for (auto t : out.input) {
      if (symbolic::kind_of(t) == symbolic::TokenKind::kSentinel) continue;
      while (j < seq.size() && seq[j] != t) ++j;
      ASSERT_LT(j, seq.size());
      ++j;
    }
  }
}

TEST(Corruption, MaskedFractionMonteCarlo) {
  std::mt19937_64 rng(7);
  const auto seqs = random_phrases(7, 500, 10);
  double frac = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto& s = seqs[static_cast<std::size_t>(i) % seqs.size()];
    frac += static_cast<double>(corrupt_spans(s, rng).masked) / static_cast<double>(s.size());
  }
  EXPECT_NEAR(frac / n, 0.3, 0.02);
}

TEST(Latent, KlClosedFormExamples) {
  LatentMoments zero{torch::zeros({64}), torch::zeros({64})};
  EXPECT_NEAR(kl_divergence(zero).item<double>(), 0.0, 1e-12);
  LatentMoments ones{torch::ones({64}), torch::zeros({64})};
  EXPECT_NEAR(kl_divergence(ones).item<double>(), 32.0, 1e-6);
}

TEST(Latent, KlNonNegativeOnRandomMoments) {
  torch::manual_seed(1);
  LatentMoments m{torch::randn({1000, 64}) * 3, torch::randn({1000, 64}) * 4};
  EXPECT_GE(kl_divergence(m).min().item<double>(), 0.0);
}

TEST(Latent, KlMatchesNumericalIntegration) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> mu(-3.0, 3.0), lv(-4.0, 3.0);
  for (int i = 0; i < 50; ++i) {
    const double m = mu(rng), l = lv(rng);
    LatentMoments mo{torch::tensor({m}, torch::kFloat64), torch::tensor({l}, torch::kFloat64)};
    EXPECT_NEAR(kl_divergence(mo).item<double>(), kl_by_integration(m, l), 1e-6) << m << " " << l;
  }
}

TEST(Latent, ReparameterizeMonteCarlo) {
  LatentMoments m{torch::zeros({100000}, torch::kFloat64), torch::zeros({100000}, torch::kFloat64)};
  auto z = reparameterize(m, nn::make_generator(11));
  EXPECT_NEAR(z.mean().item<double>(), 0.0, 0.02);
  EXPECT_NEAR(z.var().item<double>(), 1.0, 0.02);
}

TEST(Latent, ClampFloorCollapsesToMean) {
  auto mean = torch::randn({64}, torch::kFloat64);
  LatentMoments m{mean, clamp_log_var(torch::full({64}, -1e9, torch::kFloat64))};
  auto z = reparameterize(m, nn::make_generator(1));
  EXPECT_LT((z - mean).abs().max().item<double>(), 1e-2);
}

TEST(Latent, ReparameterizeGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double mu = g(rng), lv = g(rng), eps = g(rng);
    auto m = torch::tensor({mu}, torch::dtype(torch::kFloat64).requires_grad(true));
    auto l = torch::tensor({lv}, torch::dtype(torch::kFloat64).requires_grad(true));
    auto e = torch::tensor({eps}, torch::kFloat64);
    auto z = reparameterize(LatentMoments{m, l}, e).sum();
    z.backward();
    const double h = 1e-6;
    auto f = [&](double a, double b) { return a + std::exp(0.5 * b) * eps; };
    const double fd_mu = (f(mu + h, lv) - f(mu - h, lv)) / (2 * h);
    const double fd_lv = (f(mu, lv + h) - f(mu, lv - h)) / (2 * h);
    EXPECT_NEAR(m.grad().item<double>(), 1.0, 1e-4);
    worst = std::max(worst, std::abs(m.grad().item<double>() - fd_mu) / std::max(1e-12, std::abs(fd_mu)));
    worst = std::max(worst, std::abs(l.grad().item<double>() - fd_lv) / std::max(1e-8, std::abs(fd_lv)));
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(VaeModel, DefaultSizedParameterCount) {
  PhraseVae model(VaeConfig{});
  const double n = static_cast<double>(nn::parameter_count(*model));
  EXPECT_GT(n, 15e6 * 0.8);
  EXPECT_LT(n, 15e6 * 1.2);
}

TEST(VaeModel, QueryBundleShapeAndDeterminism) {
  torch::manual_seed(0);
  VaeConfig c;
  c.enc_layers = 1;
  c.dec_layers = 1;
  PhraseCodec codec{PhraseVae(c)};
  const auto phrases = random_phrases(9, 2, 6);
  const auto a = codec.encode(phrases[0]);
  EXPECT_EQ(a.q_states.sizes(), (std::vector<std::int64_t>{4, 512}));
  EXPECT_TRUE(torch::equal(a.q_states, codec.encode(phrases[0]).q_states));
  const auto m = codec.moments({phrases[1], phrases[0]});
  EXPECT_TRUE(torch::allclose(m.mean[1], codec.bottleneck_project(a).mean, 1e-5, 1e-6));
  const auto mo = codec.bottleneck_project(a);
  EXPECT_EQ(mo.mean.size(0), 64);
  EXPECT_EQ(mo.log_var.size(0), 64);
}

TEST(VaeModel, OverlengthInputIsRejected) {
  PhraseCodec codec{PhraseVae(tiny_config())};
  TokenSeq longseq(100, tok::kEndOfBar);
  EXPECT_THROW(codec.encode(longseq), LengthError);
}

TEST(VaeModel, ZeroBottleneckGivesBias) {
  PhraseVae model(tiny_config());
  {
    torch::NoGradGuard g;
    model->bottleneck->weight.zero_();
    model->bottleneck->bias.uniform_(-20.0, 20.0);
  }
  auto q = torch::randn({3, 4, 32});
  auto [mean, lv] = model->moments(q);
  auto bias = model->bottleneck->bias;
  EXPECT_TRUE(torch::allclose(mean[0], bias.narrow(0, 0, 64)));
  EXPECT_TRUE(torch::allclose(lv[2], bias.narrow(0, 64, 64).clamp(-12.0, 6.0)));
  EXPECT_LE(lv.max().item<double>(), 6.0);
  EXPECT_GE(lv.min().item<double>(), -12.0);
}

TEST(VaeModel, StageIsolationThroughQueries) {
  torch::manual_seed(3);
  PhraseVae model(tiny_config());
  model->eval();
  torch::NoGradGuard g;
  const auto phrases = random_phrases(4, 3, 6);
  const auto batch = make_batch(phrases, phrases, 4, 48);
  auto states = model->encode_states(batch.enc_ids, batch.enc_mask);
  auto logits = [&](const torch::Tensor& s, Stage stage) {
    torch::Tensor memory = stage == Stage::kAutoencoder ? model->query_states(s)
                                                        : model->expand(model->moments(model->query_states(s)).first);
    return model->decoder_logits(batch.dec_in, memory);
  };
  for (Stage stage : {Stage::kAutoencoder, Stage::kVae}) {
    const auto base = logits(states, stage);
    auto no_tokens = states.clone();
    no_tokens.narrow(1, 4, states.size(1) - 4).zero_();
    EXPECT_TRUE(torch::equal(base, logits(no_tokens, stage)));
    auto no_query = states.clone();
    no_query.narrow(1, 1, 1).zero_();
    EXPECT_FALSE(torch::allclose(base, logits(no_query, stage)));
  }
}

TEST(VaeModel, ConstrainedDecodeIsGrammaticalEvenUntrained) {
  torch::manual_seed(5);
  PhraseCodec codec{PhraseVae(tiny_config())};
  DecodeOptions opts;
  opts.max_new_tokens = 30;
  auto results = codec.decode_batch(torch::randn({20, 64}) * 3, opts);
  for (const auto& r : results) {
    if (r.tokens.empty()) {
      EXPECT_TRUE(r.truncated);
      continue;
    }
    EXPECT_TRUE(symbolic::is_grammatical(r.tokens, symbolic::GrammarLevel::kPhrase)) << symbolic::to_text(r.tokens);
  }
  const auto z = torch::randn({64});
  EXPECT_EQ(codec.decode(z).tokens, codec.decode(z).tokens);
}

TEST(VaeTrainer, StageOrderEnforced) {
  PhraseVae model(tiny_config());
  const auto data = random_phrases(1, 4, 3);
  StageOptions o;
  o.max_epochs = 1;
  o.stage = Stage::kAutoencoder;
  EXPECT_THROW(train_stage(model, data, {}, o), ConfigError);
  o.stage = Stage::kVae;
  EXPECT_THROW(train_stage(model, data, {}, o), ConfigError);
  o.stage = Stage::kPretrain;
  train_stage(model, data, {}, o);
  EXPECT_EQ(model->stage(), Stage::kPretrain);
  o.stage = Stage::kVae;
  EXPECT_THROW(train_stage(model, data, {}, o), ConfigError);
}

TEST(VaeTrainer, DivergenceIsReported) {
  VaeConfig c = tiny_config();
  c.lr = 1e30;
  c.warmup_steps = 1;
  PhraseVae model(c);
  {
    torch::NoGradGuard g;
    for (auto& p : model->parameters()) p.fill_(std::numeric_limits<float>::quiet_NaN());
  }
  StageOptions o;
  o.max_epochs = 1;
  EXPECT_THROW(train_stage(model, random_phrases(2, 4, 3), {}, o), TrainingDivergedError);
}

TEST(VaeTrainer, PretrainOverfitsTenPhrases) {
  torch::manual_seed(7);
  VaeConfig c = tiny_config();
  c.d_hidden = 64;
  c.d_head = 32;
  c.d_ff = 128;
  c.enc_layers = 2;
  c.dec_layers = 2;
  PhraseVae model(c);
  const auto data = random_phrases(21, 10, 5);
  StageOptions o;
  o.max_epochs = 400;
  o.patience = 400;
  o.seed = 3;
  const auto result = train_stage(model, data, {}, o);
  // Teacher-forced accuracy on the uncorrupted phrases.
  model->eval();
  torch::NoGradGuard g;
  const auto parts = model->loss(make_batch(data, data, c.n_queries, c.max_tokens), Stage::kPretrain);
  EXPECT_GT(static_cast<double>(parts.correct) / parts.tokens, 0.995) << "epochs " << result.epochs_run;
}

TEST(VaeCheckpoint, RoundTripAndIntegrity) {
  const auto dir = std::filesystem::temp_directory_path() / "phrasegen_vae_ckpt";
  std::filesystem::create_directories(dir);
  torch::manual_seed(2);
  PhraseVae model(tiny_config());
  model->set_stage(Stage::kAutoencoder);
  save_vae(model, dir / "vae.pt");
  auto loaded = load_vae(dir / "vae.pt");
  EXPECT_EQ(loaded->stage(), Stage::kAutoencoder);
  EXPECT_EQ(loaded->config(), model->config());
  auto a = model->parameters(), b = loaded->parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(torch::equal(a[i], b[i]));

  nlohmann::json meta = {{"kind", "phrase_vae"}, {"config", model->config()}, {"stage", "ae"}, {"vocab_hash", "0000"}};
  nn::save_with_meta(*model, meta, dir / "bad.pt");
  EXPECT_THROW(load_vae(dir / "bad.pt"), IntegrityError);
  EXPECT_THROW(load_vae(dir / "missing.pt"), MissingArtifactError);
  std::filesystem::remove_all(dir);
}

TEST(PhrasePrefix, AcceptsExactlyGrammaticalPhrases) {
  std::mt19937_64 rng(1);
  for (const auto& seq : random_phrases(31, 300, 8)) {
    symbolic::PhrasePrefix p;
    for (auto t : seq) {
      ASSERT_TRUE(p.allows(t));
      p.push(t);
    }
    EXPECT_TRUE(p.complete());
  }
  symbolic::PhrasePrefix p;
  EXPECT_FALSE(p.allows(symbolic::onset_token(0)));
  p.push(symbolic::instrument_token(0));
  EXPECT_FALSE(p.complete());
  p.push(symbolic::onset_token(12));
  p.push(symbolic::pitch_token(60));
  p.push(symbolic::duration_token(6));
  EXPECT_TRUE(p.complete());
  EXPECT_FALSE(p.allows(symbolic::pitch_token(61)));
  EXPECT_FALSE(p.allows(symbolic::onset_token(12)));
  EXPECT_TRUE(p.allows(symbolic::onset_token(13)));
  EXPECT_THROW(p.push(symbolic::duration_token(3)), GrammarError);
}
