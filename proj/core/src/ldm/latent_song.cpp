#include "phrasegen/ldm/latent_song.hpp"

#include "phrasegen/errors.hpp"

namespace phrasegen::ldm {

LatentSong pad_latent_song(const torch::Tensor& units, const torch::Tensor& eos_latent, int context) {
  if (units.dim() != 2 || eos_latent.dim() != 1 || units.size(1) != eos_latent.size(0))
    throw ConfigError("latent shapes do not agree");
  const auto n = units.size(0);
  if (n + 1 > context)
    throw LengthError("song needs " + std::to_string(n + 1) + " latents but the context holds " + std::to_string(context));
  auto out = eos_latent.to(torch::kFloat32).unsqueeze(0).repeat({context, 1});
  out.narrow(0, 0, n).copy_(units);
  return LatentSong{out, static_cast<int>(n)};
}

}  // namespace phrasegen::ldm
