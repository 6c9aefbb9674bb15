#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phrasegen/symbolic/song.hpp"

namespace phrasegen::symbolic {

struct QuantizationConfig {
  /// When false, songs longer than kMaxBars raise SongTooLongError.
  bool truncate_long_songs = false;
  /// Track index (in file order) holding the melody. Takes precedence over
  /// name-based inference.
  std::optional<int> melody_track;
};

/// Parses a format 0/1 Standard MIDI File and quantizes it onto the 48-per-bar
/// grid. Only 4/4 is accepted. Tracks sharing a program are merged into one
/// instrument; channel 10 maps to the drum instrument.
Song ingest_midi(std::span<const std::uint8_t> bytes, const QuantizationConfig& config = {});

/// Grid position (in 48ths of a 4/4 bar) nearest to an absolute tick.
long quantize_tick(long tick, int ticks_per_quarter);

struct MidiWriteOptions {
  int ticks_per_quarter = 480;
  double bpm = 120.0;
};

/// Format-1 file: a conductor track (tempo, 4/4) and one track per
/// instrument with a program change. The melody track is named "melody".
std::vector<std::uint8_t> write_midi(const Song& song, const MidiWriteOptions& options = {});

}  // namespace phrasegen::symbolic
