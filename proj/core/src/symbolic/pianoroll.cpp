#include "phrasegen/symbolic/pianoroll.hpp"

#include <algorithm>

namespace phrasegen::symbolic {

BarPianoRoll bar_to_pianoroll(const Bar& bar) {
  BarPianoRoll roll;
  for (const Phrase& p : bar.phrases) {
    if (p.is_special()) continue;
    for (const Note& n : p.notes) {
      auto [it, inserted] = roll.cells.try_emplace(RollKey{p.instrument, n.onset, n.pitch}, n.duration);
      if (!inserted) it->second = std::max(it->second, n.duration);
    }
  }
  return roll;
}

}  // namespace phrasegen::symbolic
