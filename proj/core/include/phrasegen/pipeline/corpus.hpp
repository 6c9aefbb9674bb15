#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "phrasegen/pipeline/run_config.hpp"
#include "phrasegen/symbolic/song.hpp"
#include "phrasegen/symbolic/vocab.hpp"

namespace phrasegen::pipeline {

inline constexpr const char* kTrainSplit = "train";
inline constexpr const char* kValidationSplit = "validation";

struct CorpusEntry {
  std::string id;
  std::string split;
  symbolic::Song song;
  /// Section annotation; empty when none was given.
  std::vector<symbolic::Section> layout;
};

struct Rejection {
  std::string id;
  std::string reason;
};

struct PreparedCorpus {
  std::vector<CorpusEntry> songs;
  std::vector<Rejection> rejected;

  std::vector<const CorpusEntry*> split(const std::string& name) const;
  /// Most common melody instrument over the corpus.
  int melody_instrument() const;
};

/// Loads songs from the configured source. Unusable MIDI files are listed as
/// rejections rather than thrown. Throws EmptySongError when nothing is left.
PreparedCorpus load_source(const CorpusSource& source);

/// Marks round(fraction * n) songs, at least one when n > 1, as validation.
/// Depends only on (n, fraction, seed).
std::vector<bool> validation_mask(std::size_t n, double fraction, std::uint64_t seed);

/// <dir>/corpus.jsonl, one song per line with its tokens as text.
void save_corpus(const PreparedCorpus& corpus, const std::filesystem::path& dir);
PreparedCorpus load_corpus(const std::filesystem::path& dir);

/// Phrase and END_OF_BAR token sequences of a song in order, without the
/// END_OF_SONG terminator.
std::vector<symbolic::TokenSeq> song_units(const symbolic::Song& song);

/// Distinct phrase sequences of the given songs, sorted.
std::vector<symbolic::TokenSeq> distinct_phrases(const std::vector<const CorpusEntry*>& songs);

/// VAE training data: distinct train phrases plus END_OF_BAR and
/// END_OF_SONG; validation holds distinct validation phrases not seen in
/// training (all of them if that leaves nothing).
struct PhraseSplit {
  std::vector<symbolic::TokenSeq> train;
  std::vector<symbolic::TokenSeq> validation;
};
PhraseSplit phrase_split(const PreparedCorpus& corpus);

}  // namespace phrasegen::pipeline
