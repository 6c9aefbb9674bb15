#pragma once

#include <compare>
#include <string>
#include <vector>

namespace phrasegen::symbolic {

/// One note, positioned in 48th-note units relative to its bar.
struct Note {
  int onset = 0;     // [0, 47]
  int pitch = 60;    // [1, 128]
  int duration = 1;  // [1, 48]

  friend bool operator==(const Note&, const Note&) = default;
};

/// Canonical in-phrase order: onset ascending, then pitch descending.
bool note_precedes(const Note& a, const Note& b) noexcept;

enum class PhraseKind { kNotes, kEndOfBar, kEndOfSong };

/// All notes of one instrument inside one bar. The two sentinel kinds carry
/// no notes and stand for the bar and song terminators in latent space.
struct Phrase {
  PhraseKind kind = PhraseKind::kNotes;
  int instrument = 0;
  std::vector<Note> notes;

  static Phrase end_of_bar() { return Phrase{PhraseKind::kEndOfBar, 0, {}}; }
  static Phrase end_of_song() { return Phrase{PhraseKind::kEndOfSong, 0, {}}; }
  bool is_special() const noexcept { return kind != PhraseKind::kNotes; }

  friend bool operator==(const Phrase&, const Phrase&) = default;
};

struct Bar {
  std::vector<Phrase> phrases;
  friend bool operator==(const Bar&, const Bar&) = default;
};

struct Song {
  std::vector<Bar> bars;
  int melody_instrument = 0;
  friend bool operator==(const Song&, const Song&) = default;
};

/// Section of an annotated layout, e.g. {"A", 8}.
struct Section {
  std::string type;
  int n_bars = 0;
  friend bool operator==(const Section&, const Section&) = default;
};

double average_pitch(const Phrase& phrase);

/// True when `a` must be emitted before `b` inside a bar: higher average
/// pitch first, ties broken by lower instrument id.
bool phrase_precedes(const Phrase& a, const Phrase& b);

/// Sorts notes canonically, merges duplicate (onset, pitch) keys keeping the
/// longest duration, and clamps durations into [1, kMaxDuration].
Phrase normalize_phrase(Phrase phrase);

/// Normalizes each phrase, drops empty ones and sorts phrases canonically.
/// Phrases sharing an instrument are merged.
Bar normalize_bar(Bar bar);

/// Throws GrammarError when a phrase, bar or song breaks its invariants.
void validate_phrase(const Phrase& phrase);
void validate_bar(const Bar& bar);
void validate_song(const Song& song, bool ldm_bound = true);

int note_count(const Song& song);

std::string format_layout(const std::vector<Section>& layout);
/// Parses "i-8,A-8,B-4" into sections. Throws ConfigError on bad syntax.
std::vector<Section> parse_layout(const std::string& text);
int layout_bars(const std::vector<Section>& layout);

}  // namespace phrasegen::symbolic
