#pragma once

#include <torch/torch.h>

namespace phrasegen::ldm {

/// Fixed-length latent sequence; every position from `true_length` on holds
/// the END_OF_SONG latent.
struct LatentSong {
  torch::Tensor latents;  // [context, channels], float32
  int true_length = -1;   // -1 when unknown (fresh samples)
};

/// `units` [N, C] are the phrase and END_OF_BAR latents of a song in order,
/// without the terminator. Throws LengthError if N + 1 > context.
LatentSong pad_latent_song(const torch::Tensor& units, const torch::Tensor& eos_latent, int context);

}  // namespace phrasegen::ldm
