#include "phrasegen/pipeline/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "phrasegen/errors.hpp"
#include "phrasegen/hashing.hpp"
#include "phrasegen/metrics/fid.hpp"
#include "phrasegen/metrics/melody.hpp"
#include "phrasegen/metrics/ssm.hpp"
#include "phrasegen/nn/checkpoint.hpp"
#include "phrasegen/symbolic/midi.hpp"
#include "phrasegen/symbolic/tokenizer.hpp"

namespace phrasegen::pipeline {
namespace {

using symbolic::TokenSeq;
namespace fs = std::filesystem;

std::string song_name(int k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "song_%03d", k);
  return buf;
}

void require(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path))
    throw MissingArtifactError(path.string() + " not found; run `phrasegen " + producer + "` first");
}

ManifestRecord record_for(const RunConfig& config, const std::string& command) {
  ManifestRecord r;
  r.command = command;
  r.seed = config.seed;
  r.config_hash = config.hash();
  return r;
}

void write_midi_file(const symbolic::Song& song, const fs::path& path) {
  const auto bytes = symbolic::write_midi(song);
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

vae::PhraseVae load_vae_stage(const fs::path& path, vae::Stage expected) {
  require(path, "train-vae");
  auto model = vae::load_vae(path);
  if (model->stage() != expected)
    throw ConfigError(path.string() + " is a " + vae::to_string(model->stage()) + "-stage checkpoint; the " +
                      vae::to_string(expected) + " stage is required");
  return model;
}

std::size_t phrase_limit(const vae::VaeConfig& c) { return static_cast<std::size_t>(c.max_tokens - c.n_queries); }

/// Drops phrases the encoder cannot take; returns how many were dropped.
int keep_encodable(std::vector<TokenSeq>& phrases, const vae::VaeConfig& c) {
  const auto before = phrases.size();
  std::erase_if(phrases, [&](const TokenSeq& p) { return p.size() > phrase_limit(c); });
  return static_cast<int>(before - phrases.size());
}

torch::Tensor encode_phrases(vae::PhraseCodec& codec, const std::vector<TokenSeq>& phrases) {
  std::map<TokenSeq, std::int64_t> index;
  std::vector<TokenSeq> distinct;
  std::vector<std::int64_t> rows;
  for (const auto& p : phrases) {
    auto [it, inserted] = index.try_emplace(p, static_cast<std::int64_t>(distinct.size()));
    if (inserted) distinct.push_back(p);
    rows.push_back(it->second);
  }
  if (distinct.empty()) return torch::empty({0, codec.config().latent_dim});
  return codec.encode_mean(distinct).index_select(0, torch::tensor(rows, torch::kInt64));
}

std::vector<TokenSeq> phrase_tokens(const symbolic::Song& song) {
  std::vector<TokenSeq> out;
  for (const auto& bar : song.bars)
    for (const auto& p : bar.phrases) out.push_back(symbolic::tokenize_phrase(p));
  return out;
}

/// Phrase latents per bar, in bar order. Phrases too long to encode are left
/// out of their bar.
std::vector<std::vector<std::vector<float>>> song_bar_latents(vae::PhraseCodec& codec, const symbolic::Song& song) {
  auto tokens = phrase_tokens(song);
  std::vector<bool> usable;
  for (const auto& t : tokens) usable.push_back(t.size() <= phrase_limit(codec.config()));
  keep_encodable(tokens, codec.config());
  const auto z = encode_phrases(codec, tokens).to(torch::kFloat32).contiguous();
  std::vector<std::vector<std::vector<float>>> bars;
  std::size_t k = 0;
  std::int64_t row = 0;
  for (const auto& bar : song.bars) {
    std::vector<std::vector<float>> b;
    for (std::size_t i = 0; i < bar.phrases.size(); ++i, ++k) {
      if (!usable[k]) continue;
      const float* p = z[row++].data_ptr<float>();
      b.emplace_back(p, p + z.size(1));
    }
    bars.push_back(std::move(b));
  }
  return bars;
}

Eigen::MatrixXd to_eigen(const torch::Tensor& t) {
  const auto d = t.to(torch::kFloat64).contiguous();
  Eigen::MatrixXd m(d.size(0), d.size(1));
  const double* p = d.data_ptr<double>();
  for (std::int64_t i = 0; i < d.size(0); ++i)
    for (std::int64_t j = 0; j < d.size(1); ++j) m(i, j) = p[i * d.size(1) + j];
  return m;
}

}  // namespace

PreparedCorpus cmd_prepare(const RunConfig& config) {
  config.validate();
  const RunLayout layout{config.out_dir};
  DirectoryLock lock(config.out_dir);
  auto corpus = load_source(config.corpus);
  std::erase_if(corpus.songs, [&](const CorpusEntry& e) {
    for (const auto& bar : e.song.bars)
      for (const auto& p : bar.phrases) {
        const auto n = symbolic::tokenize_phrase(p).size();
        if (n > phrase_limit(config.vae)) {
          corpus.rejected.push_back(
              Rejection{e.id, "phrase of " + std::to_string(n) + " tokens exceeds the VAE context"});
          return true;
        }
      }
    return false;
  });
  if (corpus.songs.empty()) throw EmptySongError("every song was rejected");
  const auto mask = validation_mask(corpus.songs.size(), config.validation_fraction, config.seed);
  for (std::size_t i = 0; i < corpus.songs.size(); ++i) corpus.songs[i].split = mask[i] ? kValidationSplit : kTrainSplit;
  save_corpus(corpus, layout.corpus_dir());
  write_file_atomic(layout.root / "run_config.json", nlohmann::json(config).dump(2) + "\n");

  RunManifest manifest(layout.root);
  auto rec = record_for(config, "prepare");
  rec.outputs["corpus"] = manifest.artifact(layout.corpus_dir() / "corpus.jsonl");
  rec.outputs["rejected"] = manifest.artifact(layout.corpus_dir() / "rejected.json");
  rec.outputs["config"] = manifest.artifact(layout.root / "run_config.json");
  rec.metrics = {{"songs", corpus.songs.size()},
                 {"train", corpus.split(kTrainSplit).size()},
                 {"validation", corpus.split(kValidationSplit).size()},
                 {"rejected", corpus.rejected.size()},
                 {"vocab_hash", symbolic::vocab_hash()}};
  for (const auto& r : corpus.rejected) rec.notes.push_back("rejected " + r.id + ": " + r.reason);
  manifest.append(rec);
  return corpus;
}

std::vector<vae::StageResult> cmd_train_vae(const RunConfig& config, const TrainVaeOptions& options) {
  config.validate();
  const RunLayout layout{config.out_dir};
  DirectoryLock lock(config.out_dir);
  const auto corpus = load_corpus(layout.corpus_dir());
  const auto data = phrase_split(corpus);

  using vae::Stage;
  const Stage start = options.stage.value_or(Stage::kPretrain);
  torch::manual_seed(config.seed);
  vae::PhraseVae model{nullptr};
  if (!options.from.empty()) {
    require(options.from, "train-vae");
    model = vae::load_vae(options.from);
    const Stage have = model->stage();
    if (have != start && have != vae::required_predecessor(start))
      throw ConfigError("--from checkpoint is at stage " + vae::to_string(have) + "; stage " + vae::to_string(start) +
                        " needs " + vae::to_string(vae::required_predecessor(start)));
  } else if (start != Stage::kPretrain) {
    throw ConfigError("--stage " + vae::to_string(start) + " skips earlier stages; pass --from <" +
                      vae::to_string(vae::required_predecessor(start)) + " checkpoint>");
  } else {
    model = vae::PhraseVae(config.vae);
  }

  RunManifest manifest(layout.root);
  std::vector<vae::StageResult> results;
  for (Stage s : {Stage::kPretrain, Stage::kAutoencoder, Stage::kVae}) {
    if (static_cast<int>(s) < static_cast<int>(start)) continue;
    vae::StageOptions o;
    o.stage = s;
    o.max_epochs = model->config().max_epochs;
    o.patience = model->config().early_stop_patience;
    o.seed = config.seed + static_cast<std::uint64_t>(s);
    if (options.on_epoch) o.on_epoch = [&, s](const vae::EpochLog& l) { options.on_epoch(s, l); };
    auto r = vae::train_stage(model, data.train, data.validation, o);
    const auto ckpt = layout.vae_checkpoint(s);
    fs::create_directories(ckpt.parent_path());
    vae::save_vae(model, ckpt);

    nlohmann::json history = nlohmann::json::array();
    for (const auto& l : r.history) {
      history.push_back({{"epoch", l.epoch},
                         {"train_loss", l.train_loss},
                         {"train_ce", l.train_ce},
                         {"train_kl", l.train_kl},
                         {"train_accuracy", l.train_accuracy},
                         {"val_loss", l.val_loss},
                         {"val_accuracy", l.val_accuracy}});
    }
    const auto hist_path = ckpt.parent_path() / (vae::to_string(s) + "_history.json");
    write_file_atomic(hist_path, history.dump(1) + "\n");

    auto rec = record_for(config, "train-vae");
    rec.stage = vae::to_string(s);
    rec.inputs["corpus"] = manifest.artifact(layout.corpus_dir() / "corpus.jsonl");
    if (!options.from.empty() && s == start) rec.inputs["from"] = manifest.artifact(fs::absolute(options.from));
    rec.outputs["checkpoint"] = manifest.artifact(ckpt);
    rec.outputs["history"] = manifest.artifact(hist_path);
    rec.metrics = {{"best_val_loss", r.best_val_loss},
                   {"best_epoch", r.best_epoch},
                   {"epochs_run", r.epochs_run},
                   {"stopped_early", r.stopped_early},
                   {"train_phrases", data.train.size()},
                   {"validation_phrases", data.validation.size()}};
    manifest.append(rec);
    results.push_back(std::move(r));
  }
  return results;
}

LatentCache cmd_cache_latents(const RunConfig& config, const fs::path& vae_checkpoint) {
  config.validate();
  const RunLayout layout{config.out_dir};
  DirectoryLock lock(config.out_dir);
  const auto ckpt = vae_checkpoint.empty() ? layout.vae_checkpoint(vae::Stage::kVae) : vae_checkpoint;
  vae::PhraseCodec codec(load_vae_stage(ckpt, vae::Stage::kVae));
  const auto corpus = load_corpus(layout.corpus_dir());
  auto cache = build_cache(codec, corpus, sha256_file(ckpt));
  save_cache(cache, layout.cache_dir());

  RunManifest manifest(layout.root);
  auto rec = record_for(config, "cache-latents");
  rec.inputs["vae"] = manifest.artifact(fs::absolute(ckpt));
  rec.inputs["corpus"] = manifest.artifact(layout.corpus_dir() / "corpus.jsonl");
  rec.outputs["latents"] = manifest.artifact(layout.cache_dir() / "latents.bin");
  rec.outputs["manifest"] = manifest.artifact(layout.cache_dir() / "manifest.json");
  long bars = 0;
  for (const auto& s : cache.songs) bars += s.n_bars;
  rec.metrics = {{"songs", cache.songs.size()},
                 {"latents", cache.latents.size(0)},
                 {"phrases_per_bar", cache.phrases_per_bar},
                 {"units_per_bar", bars > 0 ? static_cast<double>(cache.latents.size(0)) / bars : 0.0},
                 {"phrase_floats_per_bar", cache.phrases_per_bar * cache.dim()}};
  manifest.append(rec);
  return cache;
}

std::vector<ldm::LdmExample> ldm_examples(const LatentCache& cache, const std::string& split, int context,
                                          std::vector<std::string>* skipped) {
  std::vector<ldm::LdmExample> out;
  for (const auto& s : cache.songs) {
    if (s.split != split) continue;
    if (s.n_units + 1 > context) {
      if (skipped) skipped->push_back(s.id + " needs " + std::to_string(s.n_units + 1) + " latents");
      continue;
    }
    ldm::LdmExample ex;
    ex.song = ldm::pad_latent_song(cache.song_units(s), cache.end_of_song, context);
    ex.conditions.length = symbolic::LengthBucket::for_bars(s.n_bars);
    if (!s.layout.empty()) ex.conditions.structure = ldm::StructurePrompt{s.layout};
    out.push_back(std::move(ex));
  }
  return out;
}

ldm::LdmTrainResult cmd_train_ldm(const RunConfig& config, const TrainLdmOptions& options) {
  config.validate();
  const RunLayout layout{config.out_dir};
  DirectoryLock lock(config.out_dir);
  const auto cache = load_cache(layout.cache_dir());
  if (cache.dim() != config.ldm.io_channels)
    throw IntegrityError("latent cache has " + std::to_string(cache.dim()) + " channels, ldm.io_channels is " +
                         std::to_string(config.ldm.io_channels));
  std::vector<std::string> skipped;
  const auto train = ldm_examples(cache, kTrainSplit, config.ldm.context, &skipped);
  if (train.empty()) throw ConfigError("no training song fits the LDM context");

  torch::manual_seed(config.seed);
  ldm::PhraseLdm model(config.ldm);
  ldm::LdmTrainOptions o;
  o.steps = config.ldm.steps;
  o.seed = config.seed;
  o.log_every = options.log_every;
  o.on_log = options.on_log;
  o.validation = ldm_examples(cache, kValidationSplit, config.ldm.context);
  auto result = ldm::train_ldm(model, train, o);

  const auto ckpt = layout.ldm_checkpoint();
  fs::create_directories(ckpt.parent_path());
  ldm::save_ldm(model, ckpt, {{"vae_sha256", cache.vae_sha256}, {"steps", o.steps}});
  nlohmann::json history = nlohmann::json::array();
  for (const auto& l : result.history) {
    nlohmann::json h{{"step", l.step}, {"loss", l.loss}};
    h["val_loss"] = std::isfinite(l.val_loss) ? nlohmann::json(l.val_loss) : nlohmann::json(nullptr);
    history.push_back(h);
  }
  const auto hist_path = ckpt.parent_path() / "history.json";
  write_file_atomic(hist_path, history.dump(1) + "\n");

  RunManifest manifest(layout.root);
  auto rec = record_for(config, "train-ldm");
  rec.inputs["latents"] = manifest.artifact(layout.cache_dir() / "latents.bin");
  rec.outputs["checkpoint"] = manifest.artifact(ckpt);
  rec.outputs["history"] = manifest.artifact(hist_path);
  rec.metrics = {{"steps", o.steps},
                 {"final_loss", result.final_loss},
                 {"train_songs", train.size()},
                 {"validation_songs", o.validation.size()}};
  for (const auto& s : skipped) rec.notes.push_back("skipped " + s);
  manifest.append(rec);
  return result;
}

std::vector<GeneratedSong> cmd_generate(const RunConfig& config, const GenerateOptions& options) {
  config.validate();
  if (options.count < 1) throw ConfigError("--count must be at least 1");
  const RunLayout layout{config.out_dir};
  DirectoryLock lock(config.out_dir);
  const auto ldm_path = options.request.checkpoint.empty() ? layout.ldm_checkpoint() : options.request.checkpoint;
  require(ldm_path, "train-ldm");
  auto model = ldm::load_ldm(ldm_path);
  const auto ldm_meta = nn::read_meta(ldm_path);
  const auto vae_path = options.vae_checkpoint.empty() ? layout.vae_checkpoint(vae::Stage::kVae) : options.vae_checkpoint;
  vae::PhraseCodec codec(load_vae_stage(vae_path, vae::Stage::kVae));
  const auto vae_sha = sha256_file(vae_path);
  if (ldm_meta.contains("vae_sha256") && ldm_meta.at("vae_sha256").get<std::string>() != vae_sha)
    throw IntegrityError("LDM checkpoint was trained on latents of a different VAE than " + vae_path.string());
  const int melody = load_corpus(layout.corpus_dir()).melody_instrument();
  const auto ldm_sha = sha256_file(ldm_path);

  auto base = options.request;
  base.checkpoint = ldm_path;
  if (base.sampler_steps <= 0) base.sampler_steps = model->config().sampling_steps;
  const auto conditions = base.conditions();
  const auto dir = layout.generated_dir(options.name);
  fs::create_directories(dir);

  ldm::CodecDecoder decoder(codec);
  RunManifest manifest(layout.root);
  auto rec = record_for(config, "generate");
  rec.seed = base.seed;
  rec.inputs["ldm"] = manifest.artifact(fs::absolute(ldm_path));
  rec.inputs["vae"] = manifest.artifact(fs::absolute(vae_path));
  std::vector<GeneratedSong> out;
  for (int start = 0; start < options.count; start += std::max(1, options.batch)) {
    const int n = std::min(std::max(1, options.batch), options.count - start);
    std::vector<std::uint64_t> seeds;
    for (int k = 0; k < n; ++k) seeds.push_back(base.seed + static_cast<std::uint64_t>(start + k));
    auto latents = ldm::generate_batch(model, std::vector<ldm::Conditions>(n, conditions), seeds, base.sampler_steps);
    for (int k = 0; k < n; ++k) {
      GeneratedSong g;
      g.stem = dir / song_name(start + k);
      g.request = base;
      g.request.seed = seeds[static_cast<std::size_t>(k)];
      g.latents = std::move(latents[static_cast<std::size_t>(k)]);
      nlohmann::json req = g.request;
      req["ldm_sha256"] = ldm_sha;
      req["vae_sha256"] = vae_sha;
      try {
        g.decoded = ldm::truncate_and_decode(g.latents.latents, decoder, melody);
        write_file_atomic(g.stem.string() + ".txt", symbolic::song_to_text(g.decoded.song));
        write_midi_file(g.decoded.song, g.stem.string() + ".mid");
        req["empty"] = false;
        req["bars"] = g.decoded.song.bars.size();
        req["eos_found"] = g.decoded.eos_found;
        req["eos_index"] = g.decoded.eos_index;
        req["dropped"] = g.decoded.dropped;
        req["merged"] = g.decoded.merged;
        req["bars_truncated"] = g.decoded.bars_truncated;
      } catch (const EmptySongError&) {
        req["empty"] = true;
        rec.notes.push_back(song_name(start + k) + " decoded to no bars");
      }
      write_latent_file(g.latents.latents, g.stem.string() + ".latents.bin");
      write_file_atomic(g.stem.string() + ".request.json", req.dump(2) + "\n");
      const auto name = song_name(start + k);
      rec.outputs[name + ".latents"] = manifest.artifact(g.stem.string() + ".latents.bin");
      rec.outputs[name + ".request"] = manifest.artifact(g.stem.string() + ".request.json");
      if (!req["empty"].get<bool>()) rec.outputs[name + ".mid"] = manifest.artifact(g.stem.string() + ".mid");
      out.push_back(std::move(g));
    }
  }
  rec.metrics = {{"count", options.count}, {"request", nlohmann::json(base)}};
  manifest.append(rec);
  return out;
}

void to_json(nlohmann::json& j, const MetricReport& r) {
  j = nlohmann::json{{"generated", r.generated},     {"references", r.references}, {"phrase_fid", r.phrase_fid},
                     {"fid_regularized", r.fid_regularized}, {"srs", r.srs},      {"srs_std", r.srs_std}, {"reference_srs", r.reference_srs},
                     {"mmr", r.mmr},                 {"t2r", r.t2r},               {"mr", r.mr}, {"skipped_phrases", r.skipped_phrases},
                     {"per_song_srs", r.per_song_srs}, {"per_song_mmr", r.per_song_mmr},
                     {"per_song_t2r", r.per_song_t2r}};
  j["length_accuracy"] = r.length_accuracy >= 0.0 ? nlohmann::json(r.length_accuracy) : nlohmann::json(nullptr);
}

std::string format_report(const MetricReport& r) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4);
  s << "songs generated   " << r.generated << "\n";
  s << "reference songs   " << r.references << "\n";
  s << "PhraseFID         " << r.phrase_fid << (r.fid_regularized ? "  (regularized)" : "") << "\n";
  s << "SRS               " << r.srs << " +- " << r.srs_std << "  (reference " << r.reference_srs << ")\n";
  s << "MMR               " << r.mmr << "\n";
  s << "T2R               " << r.t2r << "\n";
  s << "MR                " << r.mr << "\n";
  if (r.skipped_phrases > 0) s << "skipped phrases   " << r.skipped_phrases << "  (longer than the VAE context)\n";
  s << "length accuracy   ";
  if (r.length_accuracy >= 0.0)
    s << r.length_accuracy << "\n";
  else
    s << "n/a\n";
  return s.str();
}

MetricReport cmd_evaluate(const RunConfig& config, const EvaluateOptions& options) {
  config.validate();
  const RunLayout layout{config.out_dir};
  DirectoryLock lock(config.out_dir);
  const auto gen_dir = layout.generated_dir(options.name);
  require(gen_dir, "generate");
  const auto vae_path = options.vae_checkpoint.empty() ? layout.vae_checkpoint(vae::Stage::kVae) : options.vae_checkpoint;
  vae::PhraseCodec codec(load_vae_stage(vae_path, vae::Stage::kVae));
  const auto corpus = load_corpus(layout.corpus_dir());
  const int melody = corpus.melody_instrument();

  std::vector<fs::path> requests;
  for (const auto& e : fs::directory_iterator(gen_dir)) {
    const auto name = e.path().filename().string();
    if (name.size() > 13 && name.ends_with(".request.json")) requests.push_back(e.path());
  }
  std::sort(requests.begin(), requests.end());
  std::vector<symbolic::Song> generated;
  std::vector<int> in_bucket;
  for (const auto& req_path : requests) {
    const auto req = nlohmann::json::parse(read_file(req_path));
    if (req.value("empty", false)) continue;
    auto stem = req_path.string();
    stem.resize(stem.size() - std::string(".request.json").size());
    const auto song = symbolic::detokenize_song(symbolic::from_text(read_file(stem + ".txt")), melody);
    if (req.contains("bucket") && !req.at("bucket").is_null()) {
      const auto bucket = symbolic::LengthBucket::checked(req.at("bucket").get<int>());
      in_bucket.push_back(bucket.contains(static_cast<int>(song.bars.size())) ? 1 : 0);
    }
    generated.push_back(song);
  }
  if (generated.empty()) throw EmptySongError("no decodable generated song in " + gen_dir.string());

  auto train = corpus.split(kTrainSplit);
  std::vector<const CorpusEntry*> refs = train;
  std::mt19937_64 rng(config.seed);
  for (std::size_t i = refs.size(); i > 1; --i) std::swap(refs[i - 1], refs[rng() % i]);
  refs.resize(std::min<std::size_t>(refs.size(), static_cast<std::size_t>(config.eval_reference_songs)));

  MetricReport report;
  report.generated = static_cast<int>(generated.size());
  report.references = static_cast<int>(refs.size());

  std::vector<TokenSeq> gen_phrases, ref_phrases;
  for (const auto& s : generated)
    for (auto& p : phrase_tokens(s)) gen_phrases.push_back(std::move(p));
  for (const auto* r : refs)
    for (auto& p : phrase_tokens(r->song)) ref_phrases.push_back(std::move(p));
  report.skipped_phrases = keep_encodable(gen_phrases, codec.config());
  keep_encodable(ref_phrases, codec.config());
  if (gen_phrases.empty()) throw EmptySongError("generated songs hold no encodable phrase");
  const auto fid = metrics::phrase_fid(to_eigen(encode_phrases(codec, gen_phrases)), to_eigen(encode_phrases(codec, ref_phrases)));
  report.phrase_fid = fid.value;
  report.fid_regularized = fid.regularized;

  const auto out_dir = layout.eval_dir(options.name);
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < generated.size(); ++i) {
    const auto ssm = metrics::bar_ssm(song_bar_latents(codec, generated[i]));
    report.per_song_srs.push_back(metrics::srs(ssm));
    if (options.write_ssm_images) metrics::write_ssm_pgm(ssm, out_dir / ("ssm_" + song_name(static_cast<int>(i)) + ".pgm"));
  }
  double ref_srs = 0.0;
  for (const auto* r : refs) ref_srs += metrics::srs(metrics::bar_ssm(song_bar_latents(codec, r->song)));
  report.reference_srs = ref_srs / static_cast<double>(refs.size());
  for (double v : report.per_song_srs) report.srs += v;
  report.srs /= static_cast<double>(report.per_song_srs.size());
  for (double v : report.per_song_srs) report.srs_std += (v - report.srs) * (v - report.srs);
  report.srs_std = std::sqrt(report.srs_std / static_cast<double>(report.per_song_srs.size()));

  std::vector<symbolic::Song> train_songs;
  for (const auto* t : train) train_songs.push_back(t->song);
  const auto mem = metrics::memorization_report(generated, train_songs);
  for (const auto& m : mem.songs) {
    report.per_song_mmr.push_back(m.mmr);
    report.per_song_t2r.push_back(m.t2r);
    report.mmr += m.mmr;
    report.t2r += m.t2r;
  }
  if (!mem.songs.empty()) {
    report.mmr /= static_cast<double>(mem.songs.size());
    report.t2r /= static_cast<double>(mem.songs.size());
  }
  report.mr = mem.mr;
  if (!in_bucket.empty())
    report.length_accuracy = static_cast<double>(std::count(in_bucket.begin(), in_bucket.end(), 1)) /
                             static_cast<double>(in_bucket.size());

  write_file_atomic(out_dir / "metrics.json", nlohmann::json(report).dump(2) + "\n");
  write_file_atomic(out_dir / "report.txt", format_report(report));
  RunManifest manifest(layout.root);
  auto rec = record_for(config, "evaluate");
  rec.inputs["vae"] = manifest.artifact(fs::absolute(vae_path));
  for (const auto& r : requests) rec.inputs[r.filename().string()] = manifest.artifact(r);
  rec.outputs["metrics"] = manifest.artifact(out_dir / "metrics.json");
  rec.metrics = report;
  manifest.append(rec);
  return report;
}

std::vector<InterpolationPoint> cmd_interpolate(const RunConfig& config, const InterpolateOptions& options) {
  config.validate();
  const RunLayout layout{config.out_dir};
  DirectoryLock lock(config.out_dir);
  const auto vae_path = options.vae_checkpoint.empty() ? layout.vae_checkpoint(vae::Stage::kVae) : options.vae_checkpoint;
  vae::PhraseCodec codec(load_vae_stage(vae_path, vae::Stage::kVae));
  const auto a = symbolic::from_text(options.phrase_a);
  const auto b = symbolic::from_text(options.phrase_b);
  for (const auto* p : {&a, &b})
    if (auto v = symbolic::check_grammar(*p, symbolic::GrammarLevel::kPhrase))
      throw GrammarError("interpolation end phrase: " + v->message, v->token_index);
  auto alphas = options.alphas;
  if (alphas.empty())
    for (int k = 0; k < 8; ++k) alphas.push_back(k / 7.0);
  const auto z = codec.encode_mean({a, b});
  const auto decoded = codec.interpolate(z[0], z[1], alphas);

  const auto dir = layout.interpolate_dir();
  fs::create_directories(dir);
  RunManifest manifest(layout.root);
  auto rec = record_for(config, "interpolate");
  rec.inputs["vae"] = manifest.artifact(fs::absolute(vae_path));
  std::vector<InterpolationPoint> out;
  nlohmann::json summary = nlohmann::json::array();
  const int melody = symbolic::detokenize_phrase(a).instrument;
  for (std::size_t k = 0; k < decoded.size(); ++k) {
    InterpolationPoint p;
    p.alpha = alphas[k];
    p.tokens = decoded[k].tokens;
    p.truncated = decoded[k].truncated;
    p.grammatical = symbolic::is_grammatical(p.tokens, symbolic::GrammarLevel::kPhrase);
    char stem[32];
    std::snprintf(stem, sizeof stem, "alpha_%02zu", k);
    write_file_atomic(dir / (std::string(stem) + ".txt"), symbolic::to_text(p.tokens) + "\n");
    if (p.grammatical) {
      symbolic::Song song;
      song.melody_instrument = melody;
      song.bars.push_back(symbolic::normalize_bar(symbolic::Bar{{symbolic::detokenize_phrase(p.tokens)}}));
      write_midi_file(song, dir / (std::string(stem) + ".mid"));
    }
    rec.outputs[stem] = manifest.artifact(dir / (std::string(stem) + ".txt"));
    summary.push_back({{"alpha", p.alpha},
                       {"tokens", symbolic::to_text(p.tokens)},
                       {"grammatical", p.grammatical},
                       {"truncated", p.truncated}});
    out.push_back(std::move(p));
  }
  write_file_atomic(dir / "interpolation.json", summary.dump(2) + "\n");
  rec.outputs["summary"] = manifest.artifact(dir / "interpolation.json");
  manifest.append(rec);
  return out;
}

}  // namespace phrasegen::pipeline
