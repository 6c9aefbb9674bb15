#include "phrasegen/ldm/generate.hpp"

#include <algorithm>

#include "phrasegen/errors.hpp"
#include "phrasegen/nn/checkpoint.hpp"
#include "phrasegen/nn/transformer.hpp"
#include "phrasegen/ldm/trainer.hpp"
#include "phrasegen/symbolic/tokenizer.hpp"

namespace phrasegen::ldm {

using symbolic::TokenSeq;
namespace tok = symbolic::tok;

Conditions GenerationRequest::conditions() const {
  Conditions c;
  if (bucket) c.length = symbolic::LengthBucket::checked(*bucket);
  if (structure && !structure->empty()) c.structure = structure;
  return visible_conditions(c, mode);
}

void to_json(nlohmann::json& j, const GenerationRequest& r) {
  j = nlohmann::json{{"checkpoint", r.checkpoint.string()},
                     {"mode", to_string(r.mode)},
                     {"seed", r.seed},
                     {"sampler_steps", r.sampler_steps}};
  j["bucket"] = r.bucket ? nlohmann::json(*r.bucket) : nlohmann::json(nullptr);
  j["structure"] = r.structure ? nlohmann::json(symbolic::format_layout(r.structure->sections)) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, GenerationRequest& r) {
  r = GenerationRequest{};
  r.checkpoint = j.at("checkpoint").get<std::string>();
  r.mode = conditioning_mode_from_string(j.at("mode").get<std::string>());
  r.seed = j.at("seed").get<std::uint64_t>();
  r.sampler_steps = j.at("sampler_steps").get<int>();
  if (j.contains("bucket") && !j.at("bucket").is_null()) r.bucket = j.at("bucket").get<int>();
  if (j.contains("structure") && !j.at("structure").is_null())
    r.structure = StructurePrompt::parse(j.at("structure").get<std::string>());
}

namespace {

NoiseSchedule sampling_schedule(const LdmConfig& cfg, int sampling_steps) {
  const int steps = sampling_steps > 0 ? sampling_steps : cfg.sampling_steps;
  return NoiseSchedule::linear(cfg.diffusion_steps, cfg.beta_start, cfg.beta_end).respaced(steps);
}

}  // namespace

std::vector<LatentSong> generate_batch(PhraseLdm& model, const std::vector<Conditions>& conditions,
                                       const std::vector<std::uint64_t>& seeds, int sampling_steps) {
  if (conditions.size() != seeds.size()) throw ConfigError("one seed per generated song is required");
  if (conditions.empty()) return {};
  torch::NoGradGuard g;
  model->eval();
  const auto& cfg = model->config();
  const auto schedule = sampling_schedule(cfg, sampling_steps);
  const auto b = static_cast<std::int64_t>(seeds.size());
  std::vector<torch::Generator> gens;
  std::vector<torch::Tensor> init;
  for (auto s : seeds) {
    gens.push_back(nn::make_generator(s));
    init.push_back(at::normal(0.0, 1.0, {1, cfg.context, cfg.io_channels}, gens.back(), torch::kFloat32));
  }
  auto x = torch::cat(init);
  const auto cond_batch = make_condition_batch(conditions);
  for (int i = schedule.steps(); i >= 1; --i) {
    auto t = torch::full({b}, schedule.timesteps[static_cast<std::size_t>(i)], torch::kInt64);
    auto eps = model->forward(x, t, cond_batch);
    std::vector<torch::Tensor> rows;
    for (std::int64_t r = 0; r < b; ++r) {
      rows.push_back(denoise_step(schedule, x.narrow(0, r, 1), i, eps.narrow(0, r, 1), gens[static_cast<std::size_t>(r)]));
    }
    x = torch::cat(rows);
  }
  std::vector<LatentSong> out;
  for (std::int64_t r = 0; r < b; ++r) out.push_back(LatentSong{x[r].clone(), -1});
  return out;
}

LatentSong generate(PhraseLdm& model, const Conditions& conditions, std::uint64_t seed, int sampling_steps) {
  return generate_batch(model, {conditions}, {seed}, sampling_steps).front();
}

std::vector<TokenSeq> CodecDecoder::decode(const torch::Tensor& latents) {
  std::vector<TokenSeq> out;
  for (auto& r : codec_.decode_batch(latents)) out.push_back(std::move(r.tokens));
  return out;
}

DecodedSong truncate_and_decode(const torch::Tensor& latents, LatentDecoder& decoder, int melody_instrument, int chunk) {
  if (latents.dim() != 2) throw ConfigError("latents must be [N, C]");
  DecodedSong out;
  out.song.melody_instrument = melody_instrument;
  symbolic::Bar current;
  bool open_bar = false;
  auto close_bar = [&] {
    const auto before = current.phrases.size();
    std::vector<int> seen;
    for (const auto& p : current.phrases) seen.push_back(p.instrument);
    std::sort(seen.begin(), seen.end());
    const auto distinct = static_cast<std::size_t>(std::unique(seen.begin(), seen.end()) - seen.begin());
    out.merged += static_cast<int>(before - distinct);
    out.song.bars.push_back(symbolic::normalize_bar(std::move(current)));
    current = symbolic::Bar{};
    open_bar = false;
  };

  const auto n = latents.size(0);
  for (std::int64_t start = 0; start < n && !out.eos_found; start += chunk) {
    const auto len = std::min<std::int64_t>(chunk, n - start);
    const auto decoded = decoder.decode(latents.narrow(0, start, len));
    for (std::int64_t k = 0; k < len; ++k) {
      const auto& tokens = decoded[static_cast<std::size_t>(k)];
      if (tokens.empty()) {
        ++out.dropped;
        continue;
      }
      if (tokens.front() == tok::kEndOfSong) {
        out.eos_found = true;
        out.eos_index = static_cast<int>(start + k);
        break;
      }
      if (tokens.front() == tok::kEndOfBar) {
        close_bar();
        continue;
      }
      try {
        current.phrases.push_back(symbolic::detokenize_phrase(tokens));
        open_bar = true;
      } catch (const GrammarError&) {
        ++out.dropped;
      }
    }
  }
  if (open_bar) close_bar();
  if (static_cast<int>(out.song.bars.size()) > symbolic::kMaxBars) {
    out.song.bars.resize(symbolic::kMaxBars);
    out.bars_truncated = true;
  }
  if (out.song.bars.empty()) throw EmptySongError("no decodable bar before END_OF_SONG");
  return out;
}

void save_ldm(const PhraseLdm& model, const std::filesystem::path& path, const nlohmann::json& extra) {
  nlohmann::json meta = extra.is_object() ? extra : nlohmann::json::object();
  meta["kind"] = "phrase_ldm";
  meta["config"] = model->config();
  meta["vocab_hash"] = symbolic::vocab_hash();
  nn::save_with_meta(*model, meta, path);
}

PhraseLdm load_ldm(const std::filesystem::path& path) {
  const auto meta = nn::read_meta(path);
  if (meta.value("kind", "") != "phrase_ldm") throw IntegrityError(path.string() + " is not a PhraseLDM checkpoint");
  if (meta.value("vocab_hash", "") != symbolic::vocab_hash())
    throw IntegrityError("vocabulary hash mismatch in " + path.string());
  PhraseLdm model(meta.at("config").get<LdmConfig>());
  nn::load_weights(*model, path);
  model->eval();
  return model;
}

}  // namespace phrasegen::ldm
