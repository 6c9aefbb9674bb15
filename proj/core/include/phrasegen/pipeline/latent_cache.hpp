#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "phrasegen/pipeline/corpus.hpp"
#include "phrasegen/vae/codec.hpp"

namespace phrasegen::pipeline {

struct CachedSong {
  std::string id;
  std::string split;
  std::vector<symbolic::Section> layout;
  int n_bars = 0;
  /// First row in the latent matrix and number of rows (phrases and
  /// END_OF_BAR latents, no terminator).
  std::int64_t offset = 0;
  std::int64_t n_units = 0;
  /// Unit index one past each bar's END_OF_BAR latent.
  std::vector<int> bar_ends;
  int melody_instrument = 0;
};

struct LatentCache {
  torch::Tensor latents;     // [total_units, dim]
  torch::Tensor end_of_bar;  // [dim]
  torch::Tensor end_of_song; // [dim]
  std::vector<CachedSong> songs;
  std::string vocab_hash;
  std::string vae_sha256;
  double phrases_per_bar = 0.0;

  int dim() const { return static_cast<int>(latents.size(1)); }
  torch::Tensor song_units(const CachedSong& song) const { return latents.narrow(0, song.offset, song.n_units); }
  /// Phrase latents grouped per bar, END_OF_BAR rows removed.
  std::vector<std::vector<std::vector<float>>> bar_latents(const CachedSong& song) const;
};

/// Encodes every song unit to its posterior mean.
LatentCache build_cache(vae::PhraseCodec& codec, const PreparedCorpus& corpus, const std::string& vae_sha256);

/// <dir>/latents.bin holds float32 rows (END_OF_BAR, END_OF_SONG, then the
/// song units) and <dir>/manifest.json the layout and hashes.
void save_cache(const LatentCache& cache, const std::filesystem::path& dir);
/// Throws MissingArtifactError when absent and IntegrityError on a
/// vocabulary mismatch or a truncated latent file.
LatentCache load_cache(const std::filesystem::path& dir);

/// Raw little-endian float32 [rows, cols].
void write_latent_file(const torch::Tensor& latents, const std::filesystem::path& path);
torch::Tensor read_latent_file(const std::filesystem::path& path, std::int64_t cols);

}  // namespace phrasegen::pipeline
