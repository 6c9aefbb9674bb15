#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "phrasegen/ldm/conditions.hpp"
#include "phrasegen/ldm/diffusion.hpp"
#include "phrasegen/ldm/latent_song.hpp"
#include "phrasegen/ldm/model.hpp"
#include "phrasegen/symbolic/song.hpp"
#include "phrasegen/vae/codec.hpp"

namespace phrasegen::ldm {

/// Plain record of one generation call.
struct GenerationRequest {
  std::filesystem::path checkpoint;
  ConditioningMode mode = ConditioningMode::kUnconditional;
  std::optional<int> bucket;
  std::optional<StructurePrompt> structure;
  std::uint64_t seed = 0;
  /// 0 takes the model config's sampling_steps.
  int sampler_steps = 0;

  Conditions conditions() const;
};

void to_json(nlohmann::json& j, const GenerationRequest& r);
void from_json(const nlohmann::json& j, GenerationRequest& r);

/// Ancestral sampling of one whole latent song in a single reverse pass.
/// `sampling_steps` 0 takes the model config's value. The noise comes from
/// a generator seeded with `seed` alone, so equal seeds give equal songs.
LatentSong generate(PhraseLdm& model, const Conditions& conditions, std::uint64_t seed, int sampling_steps = 0);

/// Batched variant; entry i uses seeds[i] and gives the same result as the
/// single-song call.
std::vector<LatentSong> generate_batch(PhraseLdm& model, const std::vector<Conditions>& conditions,
                                       const std::vector<std::uint64_t>& seeds, int sampling_steps = 0);

/// Maps latents [N, C] to phrase token sequences.
class LatentDecoder {
 public:
  virtual ~LatentDecoder() = default;
  virtual std::vector<symbolic::TokenSeq> decode(const torch::Tensor& latents) = 0;
};

class CodecDecoder final : public LatentDecoder {
 public:
  explicit CodecDecoder(vae::PhraseCodec& codec) : codec_(codec) {}
  std::vector<symbolic::TokenSeq> decode(const torch::Tensor& latents) override;

 private:
  vae::PhraseCodec& codec_;
};

struct DecodedSong {
  symbolic::Song song;
  /// Index of the first latent that decoded to END_OF_SONG.
  int eos_index = -1;
  /// False when no latent decoded to END_OF_SONG; all latents were used.
  bool eos_found = false;
  /// Latents whose decode was empty and were skipped.
  int dropped = 0;
  /// Phrases merged into an earlier phrase of the same instrument.
  int merged = 0;
  /// Bars beyond the 128-bar limit were cut.
  bool bars_truncated = false;
};

/// Decodes latents in order, groups phrases into bars at END_OF_BAR and
/// stops at the first END_OF_SONG. Repairs (merging repeated instruments,
/// closing a trailing bar, cutting beyond 128 bars) are counted in the
/// result. Throws EmptySongError when no bar comes out.
DecodedSong truncate_and_decode(const torch::Tensor& latents, LatentDecoder& decoder, int melody_instrument,
                                int chunk = 64);

void save_ldm(const PhraseLdm& model, const std::filesystem::path& path, const nlohmann::json& extra = {});
PhraseLdm load_ldm(const std::filesystem::path& path);

}  // namespace phrasegen::ldm
