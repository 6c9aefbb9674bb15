// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,2,...] [--work DIR] [--reuse] [--expect-fail 3,...]
//
// Trained models are written under --work. With --reuse a checkpoint is
// loaded instead of retrained when its stamp (the exact training settings)
// matches. The exit status is 0 unless a criterion outside --expect-fail
// fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <torch/torch.h>

#include "phrasegen/errors.hpp"
#include "phrasegen/hashing.hpp"
#include "phrasegen/ldm/diffusion.hpp"
#include "phrasegen/ldm/generate.hpp"
#include "phrasegen/ldm/trainer.hpp"
#include "phrasegen/metrics/f1.hpp"
#include "phrasegen/metrics/fid.hpp"
#include "phrasegen/metrics/melody.hpp"
#include "phrasegen/metrics/ssm.hpp"
#include "phrasegen/nn/transformer.hpp"
#include "phrasegen/pipeline/commands.hpp"
#include "phrasegen/pipeline/corpus.hpp"
#include "phrasegen/pipeline/latent_cache.hpp"
#include "phrasegen/pipeline/manifest.hpp"
#include "phrasegen/symbolic/synthetic.hpp"
#include "phrasegen/symbolic/tokenizer.hpp"
#include "phrasegen/vae/codec.hpp"
#include "phrasegen/vae/latent.hpp"
#include "phrasegen/vae/trainer.hpp"
#include "support/oracles.hpp"
#include "unit/generators.hpp"

namespace fs = std::filesystem;
using namespace phrasegen;
using symbolic::TokenSeq;
namespace tok = symbolic::tok;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << v;
  return os.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------- toy setup

// Two length modes: short songs land in bucket 1 (10..19 bars), long songs
// in bucket 3 (30..39 bars).
const std::vector<std::string> kShortLayouts = {"i-2,A-4,B-4,o-2", "A-4,B-4,A-4,B-4", "i-2,A-4,x-2,B-4,o-2"};
const std::vector<std::string> kLongLayouts = {"i-4,A-8,B-8,A-8,o-4", "i-2,A-8,B-8,x-4,B-8,o-2",
                                               "A-8,B-8,A-8,B-8,o-4"};
constexpr int kShortBucket = 1;
constexpr int kLongBucket = 3;

struct VaeSchedule {
  int pretrain = 15;
  int autoencoder = 40;
  int vae = 40;
  int epochs(vae::Stage s) const {
    return s == vae::Stage::kPretrain ? pretrain : s == vae::Stage::kAutoencoder ? autoencoder : vae;
  }
};

vae::VaeConfig toy_vae(int n_queries) {
  vae::VaeConfig c;
  c.d_hidden = 128;
  c.n_heads = 4;
  c.d_head = 32;
  c.d_ff = 256;
  c.n_queries = n_queries;
  c.latent_dim = 64;
  c.max_tokens = 64;
  c.dropout = 0.0;
  c.kl_weight = 0.01;
  c.batch = 64;
  c.lr = 1e-3;
  c.warmup_steps = 100;
  c.early_stop_patience = 20;
  return c;
}

ldm::LdmConfig toy_ldm() {
  ldm::LdmConfig c;
  c.d_model = 128;
  c.io_channels = 64;
  c.layers = 4;
  c.heads = 4;
  c.context = 128;
  c.batch = 16;
  c.lr = 5e-4;
  c.warmup_steps = 200;
  c.steps = 4000;
  c.mode = ldm::ConditioningMode::kLengthStructure;
  c.cond_dropout = 0.1;
  return c;
}

// Single-song overfit models differ only in width.
ldm::LdmConfig overfit_ldm(int d_model) {
  ldm::LdmConfig c;
  c.d_model = d_model;
  c.io_channels = 64;
  c.layers = 2;
  c.heads = d_model / 32;
  c.context = 64;
  c.batch = 8;
  c.lr = 1e-3;
  c.warmup_steps = 100;
  c.steps = 2500;
  c.mode = ldm::ConditioningMode::kUnconditional;
  c.cond_dropout = 0.0;
  c.allow_narrow_width = d_model < 2 * c.io_channels;
  return c;
}

pipeline::RunConfig toy_run(const fs::path& root) {
  pipeline::RunConfig c;
  c.corpus.kind = "synthetic";
  c.corpus.synthetic_seed = 1;
  c.corpus.synthetic_songs = 200;
  for (const auto& l : kShortLayouts) {
    c.corpus.synthetic_layouts.push_back(l);
    c.corpus.synthetic_weights.push_back(0.1);
  }
  for (const auto& l : kLongLayouts) {
    c.corpus.synthetic_layouts.push_back(l);
    c.corpus.synthetic_weights.push_back(0.7 / 3.0);
  }
  c.validation_fraction = 0.1;
  c.seed = 7;
  c.vae = toy_vae(4);
  c.ldm = toy_ldm();
  c.out_dir = root / "run";
  return c;
}

class Workspace {
 public:
  Workspace(fs::path root, bool reuse) : root_(std::move(root)), reuse_(reuse), run_(toy_run(root_)) {
    fs::create_directories(root_);
  }

  const pipeline::RunConfig& run() const { return run_; }
  pipeline::RunLayout layout() const { return pipeline::RunLayout{run_.out_dir}; }

  const pipeline::PreparedCorpus& corpus() {
    if (!corpus_) {
      std::cerr << "[setup] preparing toy corpus\n";
      corpus_ = pipeline::cmd_prepare(run_);
      split_ = pipeline::phrase_split(*corpus_);
      std::cerr << "[setup] " << corpus_->songs.size() << " songs, " << split_.train.size() << " train phrases, "
                << split_.validation.size() << " validation phrases\n";
    }
    return *corpus_;
  }

  const pipeline::PhraseSplit& phrases() {
    corpus();
    return split_;
  }

  // Trains (or reloads) the m-query VAE through `last`, one stage at a time
  // with the same per-stage seeds as the pipeline.
  vae::PhraseVae vae_through(int n_queries, vae::Stage last) {
    const auto& data = phrases();
    const vae::VaeConfig cfg = toy_vae(n_queries);
    vae::PhraseVae model{nullptr};
    for (vae::Stage s : {vae::Stage::kPretrain, vae::Stage::kAutoencoder, vae::Stage::kVae}) {
      const auto path = root_ / ("vae_m" + std::to_string(n_queries) + "_" + vae::to_string(s) + ".pt");
      nlohmann::json stamp = {{"config", cfg}, {"epochs", schedule_.epochs(s)}, {"seed", run_.seed}};
      for (vae::Stage p : {vae::Stage::kPretrain, vae::Stage::kAutoencoder}) {
        if (static_cast<int>(p) < static_cast<int>(s)) stamp["epochs_" + vae::to_string(p)] = schedule_.epochs(p);
      }
      if (reuse_ && stamp_matches(path, stamp)) {
        model = vae::load_vae(path);
      } else {
        if (!model) {
          torch::manual_seed(run_.seed);
          model = vae::PhraseVae(cfg);
        }
        vae::StageOptions o;
        o.stage = s;
        o.max_epochs = schedule_.epochs(s);
        o.patience = cfg.early_stop_patience;
        o.seed = run_.seed + static_cast<std::uint64_t>(s);
        const auto t0 = Clock::now();
        auto r = vae::train_stage(model, data.train, data.validation, o);
        std::cerr << "[setup] m=" << n_queries << " " << vae::to_string(s) << ": " << r.epochs_run
                  << " epochs, best val loss " << fmt(r.best_val_loss) << " at epoch " << r.best_epoch << ", "
                  << fmt(seconds_since(t0), 0) << " s\n";
        vae::save_vae(model, path);
        write_stamp(path, stamp);
      }
      if (s == last) break;
    }
    return model;
  }

  vae::PhraseCodec& codec() {
    if (!codec_) {
      codec_ = std::make_unique<vae::PhraseCodec>(vae_through(4, vae::Stage::kVae));
      const auto target = layout().vae_checkpoint(vae::Stage::kVae);
      fs::create_directories(target.parent_path());
      vae::save_vae(codec_->model(), target);
    }
    return *codec_;
  }

  const pipeline::LatentCache& cache() {
    if (!cache_) {
      codec();
      corpus();
      cache_ = pipeline::cmd_cache_latents(run_);
    }
    return *cache_;
  }

  // The conditioned toy LDM, trained through the pipeline command.
  void ensure_ldm() {
    if (ldm_ready_) return;
    cache();
    const auto ckpt = layout().ldm_checkpoint();
    const nlohmann::json stamp = {{"config", run_.ldm},
                                  {"seed", run_.seed},
                                  {"vae_sha256", sha256_file(layout().vae_checkpoint(vae::Stage::kVae))}};
    if (!(reuse_ && stamp_matches(ckpt, stamp))) {
      const auto t0 = Clock::now();
      pipeline::TrainLdmOptions o;
      o.log_every = 500;
      o.on_log = [](const ldm::LdmLog& l) {
        std::cerr << "[setup] ldm step " << l.step << " loss " << fmt(l.loss) << " val " << fmt(l.val_loss) << "\n";
      };
      pipeline::cmd_train_ldm(run_, o);
      std::cerr << "[setup] ldm trained in " << fmt(seconds_since(t0), 0) << " s\n";
      write_stamp(ckpt, stamp);
    }
    ldm_ready_ = true;
  }

  std::vector<pipeline::GeneratedSong> generate(const std::string& name, ldm::ConditioningMode mode,
                                                std::optional<int> bucket, const std::string& structure, int count,
                                                std::uint64_t seed) {
    ensure_ldm();
    pipeline::GenerateOptions o;
    o.request.mode = mode;
    o.request.bucket = bucket;
    if (!structure.empty()) o.request.structure = ldm::StructurePrompt::parse(structure);
    o.request.seed = seed;
    o.count = count;
    o.name = name;
    o.batch = 10;
    return pipeline::cmd_generate(run_, o);
  }

  fs::path root() const { return root_; }
  bool reuse() const { return reuse_; }

  static bool stamp_matches(const fs::path& ckpt, const nlohmann::json& stamp) {
    const auto sp = fs::path(ckpt.string() + ".stamp.json");
    if (!fs::exists(ckpt) || !fs::exists(sp)) return false;
    try {
      return nlohmann::json::parse(pipeline::read_file(sp)) == stamp;
    } catch (const std::exception&) {
      return false;
    }
  }

  static void write_stamp(const fs::path& ckpt, const nlohmann::json& stamp) {
    pipeline::write_file_atomic(ckpt.string() + ".stamp.json", stamp.dump(1) + "\n");
  }

 private:
  fs::path root_;
  bool reuse_;
  pipeline::RunConfig run_;
  VaeSchedule schedule_;
  std::optional<pipeline::PreparedCorpus> corpus_;
  pipeline::PhraseSplit split_;
  std::unique_ptr<vae::PhraseCodec> codec_;
  std::optional<pipeline::LatentCache> cache_;
  bool ldm_ready_ = false;
};

// Pooled phrase F1 of reconstructions against their sources.
metrics::BarF1 pooled_phrase_f1(const std::vector<TokenSeq>& ref, const std::vector<vae::DecodeResult>& rec) {
  metrics::BarF1 total;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (ref[i].size() < 2) continue;  // END_OF_BAR / END_OF_SONG carry no notes
    symbolic::Bar pred;
    if (symbolic::is_grammatical(rec[i].tokens, symbolic::GrammarLevel::kPhrase) && rec[i].tokens.size() > 1)
      pred.phrases.push_back(symbolic::detokenize_phrase(rec[i].tokens));
    const auto f = metrics::bar_f1(pred, symbolic::Bar{{symbolic::detokenize_phrase(ref[i])}});
    total.op += f.op;
    total.opd += f.opd;
    total.iopd += f.iopd;
  }
  return total;
}

// ------------------------------------------------------------- criteria

Outcome grammar_round_trip() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  int exact = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto song = test_support::random_song(rng, 16);
    const auto tokens = symbolic::tokenize_song(song);
    if (symbolic::detokenize_song(tokens, song.melody_instrument) == song) ++exact;
  }
  const double secs = seconds_since(t0);
  return {exact == n && secs < 60.0,
          std::to_string(exact) + "/" + std::to_string(n) + " exact in " + fmt(secs, 1) + " s (need 100%, < 60 s)"};
}

Outcome f1_oracle() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> coin(0, 3);
  int agree = 0, monotone = 0;
  const int n = 1000;
  for (int trial = 0; trial < n; ++trial) {
    const auto ref = test_support::random_song(rng, 6);
    auto pred = ref;
    for (auto& bar : pred.bars)
      for (auto& ph : bar.phrases)
        for (auto& note : ph.notes) {
          const int c = coin(rng);
          if (c == 0) note.duration = std::min(symbolic::kMaxDuration, note.duration + 1);
          if (c == 1) ph.instrument = (ph.instrument + 1) % symbolic::kNumInstruments;
          if (c == 2 && trial % 2) note.pitch = std::clamp(note.pitch + 1, symbolic::kMinPitch, symbolic::kMaxPitch);
        }
    if (trial % 4 == 0) pred = test_support::random_song(rng, 6);
    const auto r = metrics::f1_scores(pred, ref);
    const auto [op, opd, iopd] = oracle::song_f1(pred, ref);
    // Both sides compute 2PR/(P+R) from the same integer counts.
    if (std::abs(r.f1_op - op) < 1e-12 && std::abs(r.f1_opd - opd) < 1e-12 && std::abs(r.f1_iopd - iopd) < 1e-12)
      ++agree;
    if (r.f1_iopd <= r.f1_opd && r.f1_opd <= r.f1_op) ++monotone;
  }
  return {agree == n && monotone == n, "oracle agreement " + std::to_string(agree) + "/" + std::to_string(n) +
                                           ", monotone " + std::to_string(monotone) + "/" + std::to_string(n)};
}

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

Outcome kl_and_fid() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> mu_d(-3.0, 3.0), lv_d(-4.0, 2.0);
  double kl_err = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double mu = mu_d(rng), lv = lv_d(rng);
    vae::LatentMoments m{torch::tensor({mu}, torch::kFloat64), torch::tensor({lv}, torch::kFloat64)};
    kl_err = std::max(kl_err, std::abs(vae::kl_divergence(m).item<double>() - kl_by_integration(mu, lv)));
  }
  const int n = 10000, d = 64;
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(n, d), b(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      a(i, j) = g(rng);
      b(i, j) = g(rng) + (j == 0 ? 2.0 : 0.0);
    }
  const auto fid = metrics::phrase_fid(a, b);
  const bool kl_ok = kl_err < 1e-6;
  const bool fid_ok = std::abs(fid.value - 4.0) <= 0.1;
  return {kl_ok && fid_ok, "KL max |err| " + sci(kl_err) + " over 50 probes (need < 1e-6); FID " + fmt(fid.value) +
                               " at n=10000, d=64, ||dmu||^2=4 (need 4.0 +- 0.1)"};
}

Outcome reparameterization_gradients() {
  torch::manual_seed(404);
  double worst = 0.0;
  const int dim = 16;
  for (int trial = 0; trial < 100; ++trial) {
    auto mean = torch::randn({dim}, torch::kFloat64) * 2.0;
    auto log_var = torch::rand({dim}, torch::kFloat64) * 6.0 - 4.0;
    const auto eps = torch::randn({dim}, torch::kFloat64);
    const auto w = torch::randn({dim}, torch::kFloat64);
    auto objective = [&](const torch::Tensor& m, const torch::Tensor& lv) {
      return (torch::sin(vae::reparameterize(vae::LatentMoments{m, lv}, eps)) * w).sum();
    };
    auto m = mean.clone().requires_grad_(true);
    auto lv = log_var.clone().requires_grad_(true);
    objective(m, lv).backward();
    const auto gm = m.grad(), glv = lv.grad();
    const double h = 1e-6;
    auto check = [&](const torch::Tensor& analytic, bool wrt_mean) {
      for (int i = 0; i < dim; ++i) {
        auto plus_m = mean.clone(), minus_m = mean.clone(), plus_l = log_var.clone(), minus_l = log_var.clone();
        if (wrt_mean) {
          plus_m[i] += h;
          minus_m[i] -= h;
        } else {
          plus_l[i] += h;
          minus_l[i] -= h;
        }
        const double fd =
            (objective(plus_m, plus_l).item<double>() - objective(minus_m, minus_l).item<double>()) / (2.0 * h);
        const double an = analytic[i].item<double>();
        worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6}));
      }
    };
    torch::NoGradGuard ng;
    check(gm, true);
    check(glv, false);
  }
  return {worst < 1e-3, "max relative error " + sci(worst) + " over 100 moment pairs (need < 1e-3)"};
}

Outcome ddpm_mechanics() {
  const auto s = ldm::NoiseSchedule::linear(1000);
  bool monotone = true;
  for (int t = 1; t <= s.steps(); ++t) monotone = monotone && s.alpha_bars[t] < s.alpha_bars[t - 1];

  torch::manual_seed(505);
  double worst_var = 0.0;
  for (int t : {1, 10, 100, 250, 500, 750, 1000}) {
    auto x0 = torch::full({200000}, 1.5, torch::kFloat64);
    auto x = ldm::q_sample(s, x0, t, torch::randn({200000}, torch::kFloat64));
    worst_var = std::max(worst_var, std::abs(x.var().item<double>() / (1.0 - s.alpha_bars[t]) - 1.0));
  }

  // The hardwired model returns exactly the noise that was injected.
  double worst_post = 0.0;
  auto x0 = torch::randn({8, 64}, torch::kFloat64);
  for (int t : {1, 2, 3, 50, 500, 999, 1000}) {
    auto noise = torch::randn_like(x0);
    auto x_t = ldm::q_sample(s, x0, t, noise);
    ldm::EpsModel hardwired = [&](const torch::Tensor&, const torch::Tensor&) { return noise; };
    auto g1 = nn::make_generator(t), g2 = nn::make_generator(t);
    auto step = ldm::denoise_step(s, x_t, t, hardwired(x_t, torch::full({8}, t, torch::kInt64)), g1);
    torch::Tensor expected;
    if (t == 1) {
      expected = x0;
    } else {
      auto z = at::normal(0.0, 1.0, x_t.sizes(), g2, x_t.options());
      const auto [c0, ct] = s.posterior_mean_coefs(t);
      expected = c0 * x0 + ct * x_t + std::sqrt(s.posterior_variance(t)) * z;
    }
    worst_post = std::max(worst_post, ((step - expected).abs() / (expected.abs() + 1.0)).max().item<double>());
  }
  const bool ok = monotone && worst_var <= 0.03 && worst_post < 1e-12;
  return {ok, std::string("alpha_bar ") + (monotone ? "strictly decreasing" : "NOT monotone") +
                  "; q_sample variance max rel dev " + fmt(worst_var) + " (need <= 0.03); posterior identity max |diff|/(1+|x|) " +
                  sci(worst_post) + " (need < 1e-12, float64)"};
}

Outcome vae_toy_fidelity(Workspace& ws) {
  const auto& val = ws.phrases().validation;
  double f1[2] = {0.0, 0.0};
  int exact[2] = {0, 0};
  const int ms[2] = {4, 1};
  for (int k = 0; k < 2; ++k) {
    vae::PhraseCodec codec(ws.vae_through(ms[k], vae::Stage::kAutoencoder));
    const auto rec = codec.reconstruct(val);
    f1[k] = pooled_phrase_f1(val, rec).opd.f1();
    for (std::size_t i = 0; i < val.size(); ++i) exact[k] += rec[i].tokens == val[i];
  }
  const bool ok = f1[0] >= 0.98 && f1[0] > f1[1];
  return {ok, "validation F1_opd m=4 " + fmt(f1[0]) + " (" + std::to_string(exact[0]) + "/" +
                  std::to_string(val.size()) + " exact, need >= 0.98), m=1 " + fmt(f1[1]) + " (" +
                  std::to_string(exact[1]) + " exact, need < m=4)"};
}

Outcome progressive_bottleneck(Workspace& ws) {
  auto& codec = ws.codec();
  const auto& data = ws.phrases();
  std::vector<TokenSeq> all = data.train;
  all.insert(all.end(), data.validation.begin(), data.validation.end());
  const auto f_all = pooled_phrase_f1(all, codec.reconstruct(all)).op.f1();
  const auto f_val = pooled_phrase_f1(data.validation, codec.reconstruct(data.validation)).op.f1();
  const auto& cache = ws.cache();
  const double std_units = cache.latents.std(0).mean().item<double>();
  const double std_distinct = codec.encode_mean(data.train).std(0).mean().item<double>();
  const bool ok = f_all >= 0.95 && std_units >= 0.6 && std_units <= 0.9;
  return {ok, "corpus phrases F1_op " + fmt(f_all) + " (need >= 0.95; held-out only " + fmt(f_val) +
                  "); latent per-dim std " + fmt(std_units) + " over " + std::to_string(cache.latents.size(0)) +
                  " cached units (need [0.6, 0.9]; distinct train phrases " + fmt(std_distinct) + ")"};
}

double max_melody_wer(const std::vector<ldm::LatentSong>& samples, ldm::LatentDecoder& decoder, int melody,
                      const std::string& reference) {
  double worst = 0.0;
  for (const auto& s : samples) {
    double w = 1.0;
    try {
      const auto d = ldm::truncate_and_decode(s.latents, decoder, melody);
      w = metrics::wer(metrics::melody_string(d.song).text, reference);
    } catch (const EmptySongError&) {
    }
    worst = std::max(worst, w);
  }
  return worst;
}

Outcome single_song_overfit(Workspace& ws) {
  const auto& cache = ws.cache();
  auto& codec = ws.codec();
  const auto& corpus = ws.corpus();
  // The shortest training song, so that it fits a 64-latent context.
  const pipeline::CachedSong* pick = nullptr;
  for (const auto& s : cache.songs)
    if (s.split == pipeline::kTrainSplit && (!pick || s.n_units < pick->n_units)) pick = &s;
  const symbolic::Song* original = nullptr;
  for (const auto& e : corpus.songs)
    if (e.id == pick->id) original = &e.song;
  const auto reference = metrics::melody_string(*original).text;
  const ldm::LdmExample example{ldm::pad_latent_song(cache.song_units(*pick), cache.end_of_song, 64), {}};

  ldm::CodecDecoder decoder(codec);
  const double ceiling = max_melody_wer({example.song}, decoder, original->melody_instrument, reference);

  double wer[2] = {0.0, 0.0};
  const int widths[2] = {256, 64};
  for (int k = 0; k < 2; ++k) {
    const auto cfg = overfit_ldm(widths[k]);
    const auto path = ws.root() / ("overfit_d" + std::to_string(widths[k]) + ".pt");
    const nlohmann::json stamp = {{"config", cfg}, {"song", pick->id}, {"vae", cache.vae_sha256}};
    ldm::PhraseLdm model{nullptr};
    if (ws.reuse() && Workspace::stamp_matches(path, stamp)) {
      model = ldm::load_ldm(path);
    } else {
      torch::manual_seed(11);
      model = ldm::PhraseLdm(cfg);
      ldm::LdmTrainOptions o;
      o.seed = 11;
      o.log_every = 500;
      o.on_log = [&](const ldm::LdmLog& l) {
        std::cerr << "[setup] overfit d=" << widths[k] << " step " << l.step << " loss " << fmt(l.loss) << "\n";
      };
      ldm::train_ldm(model, {example}, o);
      ldm::save_ldm(model, path);
      Workspace::write_stamp(path, stamp);
    }
    const auto samples = ldm::generate_batch(model, std::vector<ldm::Conditions>(3), {1, 2, 3});
    wer[k] = max_melody_wer(samples, decoder, original->melody_instrument, reference);
  }
  const bool wide_fits = wer[0] < 0.05;
  const bool narrow_fits = wer[1] < 0.05;
  return {wide_fits && !narrow_fits,
          "song " + pick->id + " (" + std::to_string(pick->n_bars) + " bars): worst melody WER over 3 samples d=256 " +
              fmt(wer[0]) + " (need < 0.05), d=64 " + fmt(wer[1]) + " (need >= 0.05); VAE-only ceiling " +
              fmt(ceiling)};
}

Outcome length_conditioning(Workspace& ws) {
  const symbolic::LengthBucket target{kShortBucket};
  auto in_bucket = [&](const std::vector<pipeline::GeneratedSong>& songs, std::string* hist) {
    int hits = 0;
    std::map<int, int> buckets;
    for (const auto& g : songs) {
      const int bars = static_cast<int>(g.decoded.song.bars.size());
      hits += target.contains(bars);
      ++buckets[bars / symbolic::LengthBucket::kWidth];
    }
    for (const auto& [b, c] : buckets) *hist += " b" + std::to_string(b) + ":" + std::to_string(c);
    return static_cast<double>(hits) / static_cast<double>(songs.size());
  };
  std::string hist_c, hist_u;
  const double cond = in_bucket(
      ws.generate("accept_len1", ldm::ConditioningMode::kLengthStructure, kShortBucket, "", 20, 1000), &hist_c);
  const double uncond =
      in_bucket(ws.generate("accept_uncond", ldm::ConditioningMode::kUnconditional, std::nullopt, "", 20, 2000),
                &hist_u);
  return {cond >= 0.8 && uncond <= 0.5, "bucket " + std::to_string(kShortBucket) + " requested: accuracy " +
                                            fmt(cond, 2) + " (need >= 0.80; buckets" + hist_c +
                                            "); unconditional: " + fmt(uncond, 2) + " (need <= 0.50; buckets" +
                                            hist_u + ")"};
}

Outcome srs_oracle() {
  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int agree = 0;
  for (int t = 0; t < 500; ++t) {
    const int n = 4 + static_cast<int>(rng() % 45);
    const double p = 0.1 + 0.8 * u(rng);
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) m(i, j) = m(j, i) = u(rng) < p ? 1.0 : 0.0;
    agree += metrics::srs(m) == oracle::srs(m);
  }
  Eigen::MatrixXd run8 = Eigen::MatrixXd::Identity(32, 32);
  for (int i = 0; i < 8; ++i) run8(4 + i, 12 + i) = run8(12 + i, 4 + i) = 1.0;
  // A bright 8x8 block next to the diagonal: runs at offsets 1..7 are each
  // other's neighbours.
  Eigen::MatrixXd cluster = Eigen::MatrixXd::Identity(24, 24);
  cluster.block(6, 6, 8, 8).setConstant(1.0);
  const double a = metrics::srs(run8), b = metrics::srs(cluster);
  const bool ok = agree == 500 && a == 0.25 && oracle::srs(run8) == 0.25 && b == 0.0 && oracle::srs(cluster) == 0.0;
  return {ok, "brute force agreement " + std::to_string(agree) + "/500; offset-8 run in 32 bars " + fmt(a) +
                  " (need 0.25); adjacent cluster " + fmt(b) + " (need 0)"};
}

std::vector<std::string> melodies(const std::vector<symbolic::AnnotatedSong>& songs) {
  std::vector<std::string> out;
  for (const auto& s : songs) out.push_back(metrics::melody_string(s.song).text);
  return out;
}

Outcome memorization_metrics() {
  std::mt19937_64 rng(1111);
  int agree = 0;
  const int trials = 60;
  for (int trial = 0; trial < trials; ++trial) {
    auto rand_seq = [&] {
      std::vector<std::string> s(1 + rng() % 12);
      for (auto& t : s) t = std::string(1, static_cast<char>('a' + rng() % 3));
      return s;
    };
    const int n_gen = 1 + static_cast<int>(rng() % 20), n_train = 2 + static_cast<int>(rng() % 19);
    std::vector<std::vector<std::string>> gen, train;
    std::vector<std::string> gen_s, train_s;
    for (int i = 0; i < n_train; ++i) train.push_back(rand_seq());
    for (int i = 0; i < n_gen; ++i) gen.push_back(i % 5 == 0 ? train[rng() % train.size()] : rand_seq());
    auto join = [](const std::vector<std::string>& s) {
      std::string out;
      for (const auto& t : s) out += t + " ";
      return out;
    };
    for (const auto& g : gen) gen_s.push_back(join(g));
    for (const auto& t : train) train_s.push_back(join(t));
    const auto r = metrics::memorization_report(gen_s, train_s);
    const auto o = oracle::memorization(gen, train);
    bool same = r.songs.size() == o.size();
    double mr = 0.0;
    for (std::size_t i = 0; same && i < o.size(); ++i) {
      same = r.songs[i].mmr == o[i].mmr && r.songs[i].t2r == o[i].t2r && r.songs[i].memorized == o[i].memorized;
      mr += o[i].memorized;
    }
    agree += same && r.mr == mr / static_cast<double>(o.size());
  }

  const auto spec = symbolic::default_corpus_spec();
  const auto train = symbolic::generate_synthetic_corpus(71, 20, spec);
  const auto fresh = symbolic::generate_synthetic_corpus(72, 20, spec);
  std::vector<symbolic::Song> train_songs, fresh_songs;
  for (const auto& s : train) train_songs.push_back(s.song);
  for (const auto& s : fresh) fresh_songs.push_back(s.song);
  const auto copied = metrics::memorization_report(std::vector<symbolic::Song>{train_songs[5]}, train_songs);
  const auto fresh_r = metrics::memorization_report(fresh_songs, train_songs);
  const auto tm = melodies(train), fm = melodies(fresh);
  bool disjoint = true;
  for (const auto& f : fm) disjoint = disjoint && std::find(tm.begin(), tm.end(), f) == tm.end();

  const bool ok = agree == trials && copied.songs[0].memorized && disjoint && fresh_r.mr == 0.0;
  return {ok, "brute force agreement " + std::to_string(agree) + "/" + std::to_string(trials) +
                  " (sets <= 20); copied song memorized: " + (copied.songs[0].memorized ? "yes" : "no") +
                  " (T2R " + fmt(copied.songs[0].t2r) + "); fresh songs MR " + fmt(fresh_r.mr) + " (need 0, training " +
                  (disjoint ? "disjoint" : "NOT disjoint") + ")"};
}

Outcome interpolation(Workspace& ws) {
  auto& codec = ws.codec();
  const auto& train = ws.phrases().train;
  std::vector<TokenSeq> notes;
  for (const auto& p : train)
    if (p.size() > 1) notes.push_back(p);
  std::mt19937_64 rng(1212);
  std::vector<double> alphas;
  for (int k = 0; k < 8; ++k) alphas.push_back(k / 7.0);
  int valid = 0, total = 0, endpoints = 0;
  const int pairs = 5;
  for (int p = 0; p < pairs; ++p) {
    const auto& a = notes[rng() % notes.size()];
    const auto& b = notes[rng() % notes.size()];
    const auto z = codec.encode_mean({a, b});
    const auto z1 = z[0], z2 = z[1];
    const auto path = codec.interpolate(z1, z2, alphas);
    for (const auto& r : path) {
      ++total;
      valid += !r.truncated && symbolic::is_grammatical(r.tokens, symbolic::GrammarLevel::kPhrase);
    }
    endpoints += path.front().tokens == codec.decode(z1).tokens && path.back().tokens == codec.decode(z2).tokens;
  }
  return {valid == total && endpoints == pairs,
          std::to_string(valid) + "/" + std::to_string(total) + " grammar-valid decodes over " +
              std::to_string(pairs) + " random pairs x 8 alphas; endpoints equal direct decodes " +
              std::to_string(endpoints) + "/" + std::to_string(pairs)};
}

std::vector<std::set<int>> bar_activity(const symbolic::Song& song) {
  std::vector<std::set<int>> out;
  for (const auto& bar : song.bars) {
    std::set<int> s;
    for (const auto& ph : bar.phrases) s.insert(ph.instrument);
    out.push_back(s);
  }
  return out;
}

// Share of bars (over the longer song) whose active instrument sets agree.
double activity_agreement(const symbolic::Song& a, const symbolic::Song& b) {
  const auto x = bar_activity(a), y = bar_activity(b);
  const std::size_t n = std::max(x.size(), y.size());
  if (n == 0) return 0.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) same += x[i] == y[i];
  return static_cast<double>(same) / static_cast<double>(n);
}

// One-sided exact permutation test of mean(a) > mean(b).
double permutation_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> all = a;
  all.insert(all.end(), b.begin(), b.end());
  const double observed = std::accumulate(a.begin(), a.end(), 0.0);
  std::vector<bool> pick(all.size(), false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(a.size()), true);
  long hits = 0, count = 0;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < all.size(); ++i)
      if (pick[i]) s += all[i];
    hits += s >= observed - 1e-12;
    ++count;
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return static_cast<double>(hits) / static_cast<double>(count);
}

Outcome structure_pass_through(Workspace& ws) {
  const std::string p1 = kLongLayouts[1], p2 = kLongLayouts[2];
  const auto a = ws.generate("accept_struct_a", ldm::ConditioningMode::kLengthStructure, kLongBucket, p1, 20, 3000);
  const auto b = ws.generate("accept_struct_b", ldm::ConditioningMode::kLengthStructure, kLongBucket, p2, 10, 4000);
  std::vector<double> same, diff;
  for (int k = 0; k < 10; ++k) {
    same.push_back(activity_agreement(a[k].decoded.song, a[k + 10].decoded.song));
    diff.push_back(activity_agreement(a[k].decoded.song, b[k].decoded.song));
  }
  const double ms = std::accumulate(same.begin(), same.end(), 0.0) / 10.0;
  const double md = std::accumulate(diff.begin(), diff.end(), 0.0) / 10.0;
  const double p = permutation_p(same, diff);
  return {ms > md && p < 0.05, "bar instrument-activity agreement same prompt " + fmt(ms, 3) + " vs different " +
                                   fmt(md, 3) + " over 10 pairs each; one-sided permutation p " + fmt(p, 4) +
                                   " (need same > different, p < 0.05)"};
}

std::vector<int> parse_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string only, expect_fail;
  std::string work = "acceptance_work";
  bool reuse = false;
  app.add_option("--only", only, "comma-separated criterion numbers");
  app.add_option("--work", work, "directory for toy models and runs");
  app.add_flag("--reuse", reuse, "load trained models whose settings match instead of retraining");
  app.add_option("--expect-fail", expect_fail, "criteria whose failure does not fail the run");
  CLI11_PARSE(app, argc, argv);

  torch::set_num_threads(1);
  Workspace ws(work, reuse);

  struct Criterion {
    int id;
    std::string title;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "grammar round-trip", grammar_round_trip},
      {2, "F1 oracle equivalence", f1_oracle},
      {3, "KL and FID closed forms", kl_and_fid},
      {4, "reparameterization gradient", reparameterization_gradients},
      {5, "VAE toy fidelity", [&] { return vae_toy_fidelity(ws); }},
      {6, "progressive bottleneck", [&] { return progressive_bottleneck(ws); }},
      {7, "DDPM mechanics", ddpm_mechanics},
      {8, "LDM single-song overfit", [&] { return single_song_overfit(ws); }},
      {9, "length conditioning", [&] { return length_conditioning(ws); }},
      {10, "SRS oracle", srs_oracle},
      {11, "memorization metrics", memorization_metrics},
      {12, "interpolation", [&] { return interpolation(ws); }},
      {13, "structure pass-through", [&] { return structure_pass_through(ws); }},
  };

  const auto selected = parse_list(only);
  const auto allowed = parse_list(expect_fail);
  auto contains = [](const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); };

  int failures = 0, passed = 0, run = 0;
  for (const auto& c : criteria) {
    const int id = c.id;
    if (!selected.empty() && !contains(selected, id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    ++run;
    std::string tag = o.pass ? "PASS" : "FAIL";
    if (!o.pass && contains(allowed, id)) tag = "FAIL (expected)";
    std::cout << "[" << tag << "] criterion " << std::setw(2) << id << " " << c.title << ": " << o.detail
              << "  [" << fmt(seconds_since(t0), 1) << " s]" << std::endl;
    if (o.pass)
      ++passed;
    else if (!contains(allowed, id))
      ++failures;
  }
  std::cout << passed << "/" << run << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
