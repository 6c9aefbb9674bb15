#pragma once

#include <vector>

#include "phrasegen/symbolic/song.hpp"

namespace phrasegen::metrics {

/// Raw match statistics for one comparison level.
struct MatchCounts {
  long matched = 0;
  long predicted = 0;
  long reference = 0;

  /// 2PR/(P+R); 1 when both sides are empty, 0 when exactly one is.
  double f1() const noexcept;
  MatchCounts& operator+=(const MatchCounts& o) noexcept {
    matched += o.matched;
    predicted += o.predicted;
    reference += o.reference;
    return *this;
  }
};

struct BarF1 {
  MatchCounts op, opd, iopd;
};

/// Song-level scores pool the counts of all bars before taking F1.
struct F1Report {
  double f1_op = 0.0;
  double f1_opd = 0.0;
  double f1_iopd = 0.0;
  std::vector<BarF1> per_bar;
};

/// Compares bar piano rolls. A note is a cell of the bar piano roll; at each
/// level notes are keyed by (onset, pitch), (onset, pitch, duration) or
/// (instrument, onset, pitch, duration) and matched as multisets, so a
/// stricter key can never match more notes than a looser one.
BarF1 bar_f1(const symbolic::Bar& pred, const symbolic::Bar& ref);

/// Songs are aligned bar by bar; the shorter one is padded with empty bars.
F1Report f1_scores(const symbolic::Song& pred, const symbolic::Song& ref);

/// Single phrase against single phrase, treated as one-phrase bars.
F1Report phrase_f1(const symbolic::Phrase& pred, const symbolic::Phrase& ref);

}  // namespace phrasegen::metrics
