#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phrasegen/symbolic/song.hpp"

namespace phrasegen::symbolic {

/// Fixed program numbers used by the synthetic corpus.
inline constexpr int kSyntheticMelody = 73;         // flute
inline constexpr int kSyntheticLead = 26;           // jazz guitar
inline constexpr int kSyntheticAccompaniment = 0;   // piano

struct CorpusSpec {
  /// Candidate section layouts; each song draws one.
  std::vector<std::vector<Section>> layouts;
  /// Relative draw weights, parallel to `layouts`. Empty means uniform.
  std::vector<double> weights;
};

struct AnnotatedSong {
  std::string id;
  Song song;
  std::vector<Section> layout;
};

/// Deterministic given (seed, n_songs, spec). Every recurrence of a section
/// type replays the same bars note for note, so repeated sections are exact
/// copies. Instrument activity depends on the section type:
///   i, o: accompaniment   A: melody + accompaniment   B: all three
///   x: lead + accompaniment   X: melody + lead   other: melody + accompaniment
/// Throws ConfigError when a layout is empty or exceeds kMaxBars.
std::vector<AnnotatedSong> generate_synthetic_corpus(std::uint64_t seed, int n_songs, const CorpusSpec& spec);

/// Mixed pop-like layouts of 20 to 44 bars.
CorpusSpec default_corpus_spec();

/// Annotation file: one line per song, "<id> <layout>".
std::string format_annotations(const std::vector<AnnotatedSong>& corpus);

}  // namespace phrasegen::symbolic
