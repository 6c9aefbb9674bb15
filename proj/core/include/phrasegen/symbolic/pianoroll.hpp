#pragma once

#include <map>
#include <tuple>

#include "phrasegen/symbolic/song.hpp"

namespace phrasegen::symbolic {

struct RollKey {
  int instrument = 0;
  int onset = 0;
  int pitch = 0;
  auto operator<=>(const RollKey&) const = default;
};

/// Sparse bar-level piano roll: (instrument, onset, pitch) -> duration.
struct BarPianoRoll {
  std::map<RollKey, int> cells;
  friend bool operator==(const BarPianoRoll&, const BarPianoRoll&) = default;
};

/// Duplicate keys keep the longest duration.
BarPianoRoll bar_to_pianoroll(const Bar& bar);

}  // namespace phrasegen::symbolic
