#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "phrasegen/symbolic/length_bucket.hpp"
#include "phrasegen/symbolic/song.hpp"

namespace phrasegen::metrics {

struct MelodyString {
  std::string text;
  /// True when no bar contains a melody phrase; `text` is then empty.
  bool empty = false;
};

/// Onset and pitch token names of the melody phrase in each bar, each bar
/// closed by "|". A single bar holding (0, 60, 12) gives "o-0 p-60 |".
MelodyString melody_string(const symbolic::Song& song);

/// Splits on whitespace.
std::vector<std::string> split_tokens(std::string_view text);

/// Token-level Levenshtein distance.
long edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Edit distance divided by the reference length. Throws LengthError when
/// the reference is empty.
double wer(std::string_view hyp, std::string_view ref);
double wer(const std::vector<std::string>& hyp, const std::vector<std::string>& ref);

struct SongMemorization {
  double mmr = 0.0;
  double t2r = 1.0;
  double d1 = 0.0;
  double d2 = 0.0;
  int nearest = -1;  // index into the training melodies
  bool memorized = false;
};

struct MemorizationReport {
  std::vector<SongMemorization> songs;
  double mr = 0.0;
  /// Only one usable training melody, so every T2R is reported as 1.
  bool single_reference = false;
  /// Training songs without a melody are skipped.
  int skipped_references = 0;
};

inline constexpr double kMemorizedRatio = 1.0 / 3.0;

/// Training melodies are the WER references. Similarity is max(0, 1 - WER).
MemorizationReport memorization_report(const std::vector<std::string>& generated,
                                       const std::vector<std::string>& training);
MemorizationReport memorization_report(const std::vector<symbolic::Song>& generated,
                                       const std::vector<symbolic::Song>& training);

double length_accuracy(const std::vector<int>& bar_counts, symbolic::LengthBucket bucket);
double length_accuracy(const std::vector<symbolic::Song>& songs, symbolic::LengthBucket bucket);

}  // namespace phrasegen::metrics
