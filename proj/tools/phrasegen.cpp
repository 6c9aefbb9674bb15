#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "phrasegen/errors.hpp"
#include "phrasegen/pipeline/commands.hpp"
#include "phrasegen/symbolic/tokenizer.hpp"

using namespace phrasegen;
using namespace phrasegen::pipeline;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;

  RunConfig load() const {
    RunConfig c = config.empty() ? RunConfig{} : load_run_config(config);
    if (seed) c.seed = *seed;
    if (!out.empty()) c.out_dir = out;
    return c;
  }
};

void add_common(CLI::App& app, Common& common) {
  app.add_option("--config", common.config, "JSON run config")->check(CLI::ExistingFile);
  app.add_option("--seed", common.seed, "Seed overriding the config");
  app.add_option("--out", common.out, "Run directory overriding the config");
}

std::vector<double> parse_alphas(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("bad alpha '" + item + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  CLI::App app{"Phrase-level latent diffusion for symbolic music"};
  app.require_subcommand(1);
  Common common;
  add_common(app, common);

  auto* prepare = app.add_subcommand("prepare", "Ingest the corpus and split train/validation");

  auto* train_vae = app.add_subcommand("train-vae", "Train the phrase VAE (pretrain, ae, vae)");
  std::string stage, from;
  train_vae->add_option("--stage", stage, "First stage to run")->check(CLI::IsMember({"pretrain", "ae", "vae"}));
  train_vae->add_option("--from", from, "Checkpoint to continue from");

  auto* cache = app.add_subcommand("cache-latents", "Encode the corpus to phrase latents");
  std::string cache_vae;
  cache->add_option("--vae", cache_vae, "VAE-stage checkpoint (default: run's vae/vae.pt)");

  auto* train_ldm = app.add_subcommand("train-ldm", "Train the latent diffusion model");
  int log_every = 100;
  train_ldm->add_option("--log-every", log_every, "Steps per log line");

  auto* generate = app.add_subcommand("generate", "Sample songs");
  GenerateOptions gen;
  std::string gen_ckpt, gen_vae, mode = "unconditional", structure;
  std::optional<int> bucket;
  int steps = 0;
  generate->add_option("--checkpoint", gen_ckpt, "LDM checkpoint (default: run's ldm/ldm.pt)");
  generate->add_option("--vae", gen_vae, "VAE-stage checkpoint");
  generate->add_option("--mode", mode, "Conditions to apply")
      ->check(CLI::IsMember({"unconditional", "length", "length+structure"}));
  generate->add_option("--bars-bucket", bucket, "Length bucket k: [10k, 10k+10) bars")->check(CLI::Range(0, 12));
  generate->add_option("--structure", structure, "Section prompt, e.g. i-8,A-8,B-4");
  generate->add_option("--count", gen.count, "Songs to generate");
  generate->add_option("--name", gen.name, "Output folder under generated/");
  generate->add_option("--steps", steps, "Sampling steps (default from the model config)");
  generate->add_option("--batch", gen.batch, "Songs sampled together");

  auto* evaluate = app.add_subcommand("evaluate", "Score generated songs against the corpus");
  EvaluateOptions eval;
  std::string eval_vae;
  bool no_ssm = false;
  evaluate->add_option("--name", eval.name, "Generated folder to score");
  evaluate->add_option("--vae", eval_vae, "VAE-stage checkpoint");
  evaluate->add_flag("--no-ssm", no_ssm, "Skip SSM images");

  auto* interpolate = app.add_subcommand("interpolate", "Decode points between two phrase latents");
  InterpolateOptions interp;
  std::string interp_vae, alphas;
  interpolate->add_option("--vae", interp_vae, "VAE-stage checkpoint");
  interpolate->add_option("--phrase-a", interp.phrase_a, "Token text, e.g. \"I-0 o-0 p-60 d-12\"")->required();
  interpolate->add_option("--phrase-b", interp.phrase_b, "Token text")->required();
  interpolate->add_option("--alphas", alphas, "Comma-separated mixing weights (default: 8 points over [0, 1])");

  for (auto* sub : {prepare, train_vae, cache, train_ldm, generate, evaluate, interpolate}) add_common(*sub, common);

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig config = common.load();
    if (*prepare) {
      const auto corpus = cmd_prepare(config);
      std::printf("%zu songs (%zu train, %zu validation), %zu rejected\n", corpus.songs.size(),
                  corpus.split(kTrainSplit).size(), corpus.split(kValidationSplit).size(), corpus.rejected.size());
      for (const auto& r : corpus.rejected) std::printf("  rejected %s: %s\n", r.id.c_str(), r.reason.c_str());
    } else if (*train_vae) {
      TrainVaeOptions o;
      if (!stage.empty()) o.stage = vae::stage_from_string(stage);
      o.from = from;
      o.on_epoch = [](vae::Stage s, const vae::EpochLog& l) {
        std::fprintf(stderr, "[%s] epoch %d  loss %.4f  kl %.3f  acc %.4f  val %.4f  val_acc %.4f%s\n",
                     vae::to_string(s).c_str(), l.epoch, l.train_loss, l.train_kl, l.train_accuracy, l.val_loss,
                     l.val_accuracy, l.improved ? "  *" : "");
      };
      for (const auto& r : cmd_train_vae(config, o))
        std::printf("%s: best val loss %.5f at epoch %d of %d\n", vae::to_string(r.stage).c_str(), r.best_val_loss,
                    r.best_epoch, r.epochs_run);
    } else if (*cache) {
      const auto c = cmd_cache_latents(config, cache_vae);
      std::printf("%zu songs, %lld latents, %.3f phrases per bar (+1 END_OF_BAR)\n", c.songs.size(),
                  static_cast<long long>(c.latents.size(0)), c.phrases_per_bar);
    } else if (*train_ldm) {
      TrainLdmOptions o;
      o.log_every = log_every;
      o.on_log = [](const ldm::LdmLog& l) {
        std::fprintf(stderr, "step %d  loss %.5f  val %.5f  %.0fs\n", l.step, l.loss, l.val_loss, l.seconds);
      };
      const auto r = cmd_train_ldm(config, o);
      std::printf("final loss %.5f\n", r.final_loss);
    } else if (*generate) {
      gen.request.checkpoint = gen_ckpt;
      gen.request.mode = ldm::conditioning_mode_from_string(mode);
      gen.request.bucket = bucket;
      if (!structure.empty()) gen.request.structure = ldm::StructurePrompt::parse(structure);
      gen.request.seed = config.seed;
      gen.request.sampler_steps = steps;
      gen.vae_checkpoint = gen_vae;
      for (const auto& g : cmd_generate(config, gen)) {
        if (g.decoded.song.bars.empty())
          std::printf("%s: empty\n", g.stem.string().c_str());
        else
          std::printf("%s: %zu bars%s\n", g.stem.string().c_str(), g.decoded.song.bars.size(),
                      g.decoded.eos_found ? "" : " (no END_OF_SONG)");
      }
    } else if (*evaluate) {
      eval.vae_checkpoint = eval_vae;
      eval.write_ssm_images = !no_ssm;
      std::fputs(format_report(cmd_evaluate(config, eval)).c_str(), stdout);
    } else if (*interpolate) {
      interp.vae_checkpoint = interp_vae;
      if (!alphas.empty()) interp.alphas = parse_alphas(alphas);
      for (const auto& p : cmd_interpolate(config, interp))
        std::printf("%.3f  %s%s\n", p.alpha, symbolic::to_text(p.tokens).c_str(), p.grammatical ? "" : "  (invalid)");
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const MissingArtifactError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
