#include "phrasegen/symbolic/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <random>

#include "phrasegen/errors.hpp"
#include "phrasegen/symbolic/vocab.hpp"

namespace phrasegen::symbolic {
namespace {

constexpr std::array<int, 7> kMajor = {0, 2, 4, 5, 7, 9, 11};

const std::vector<std::vector<int>> kMelodyRhythms = {
    {0, 12, 24, 36}, {0, 24},         {0, 12, 24},     {0, 6, 12, 24, 36},
    {0, 12, 18, 24, 36}, {0, 12, 24, 30, 36, 42}, {0, 18, 24, 36}, {0, 36},
};
const std::vector<std::vector<int>> kLeadRhythms = {{0}, {24}, {0, 24}, {12, 36}, {0, 36}};
const std::vector<std::array<int, 4>> kProgressions = {
    {0, 4, 5, 3}, {0, 5, 3, 4}, {5, 3, 0, 4}, {0, 3, 4, 4}, {1, 4, 0, 0}, {0, 2, 3, 4},
};

enum class AccStyle { kBlock, kArpeggio, kPulse, kBassChord };

struct Rng {
  std::mt19937_64 gen;
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); }
  template <class T>
  const T& pick(const std::vector<T>& v) { return v[static_cast<std::size_t>(uniform(0, static_cast<int>(v.size()) - 1))]; }
  bool coin(double p) { return std::bernoulli_distribution(p)(gen); }
};

// Scale degree (may exceed 6 or go negative) to MIDI pitch.
int degree_pitch(int root, int degree, int base_octave) {
  const int oct = (degree >= 0 ? degree / 7 : (degree - 6) / 7);
  const int idx = degree - 7 * oct;
  return root + 12 * (base_octave + oct) + kMajor[static_cast<std::size_t>(idx)];
}

std::vector<int> chord_degrees(int chord) { return {chord, chord + 2, chord + 4}; }

// Nearest degree to `target` pitch whose pitch class is in the chord.
int nearest_chord_degree(int root, int chord, int base_octave, int target) {
  int best = 0, best_dist = 1 << 20;
  for (int d = -14; d <= 21; ++d) {
    const int pc = ((d % 7) + 7) % 7;
    const int c = ((chord % 7) + 7) % 7;
    if (pc != c && pc != (c + 2) % 7 && pc != (c + 4) % 7) continue;
    const int dist = std::abs(degree_pitch(root, d, base_octave) - target);
    if (dist < best_dist) {
      best_dist = dist;
      best = d;
    }
  }
  return best;
}

std::vector<Note> with_gap_durations(const std::vector<int>& onsets, bool detached) {
  std::vector<Note> notes;
  for (std::size_t i = 0; i < onsets.size(); ++i) {
    const int next = i + 1 < onsets.size() ? onsets[i + 1] : kPositionsPerBar;
    int dur = next - onsets[i];
    if (detached && dur >= 12) dur /= 2;
    notes.push_back(Note{onsets[i], 0, dur});
  }
  return notes;
}

struct SectionMaterial {
  std::vector<Bar> bars;
};

class SongBuilder {
 public:
  SongBuilder(std::uint64_t seed) : rng_{std::mt19937_64(seed)} {
    root_ = rng_.uniform(0, 11) - 5;
  }

  SectionMaterial make_section(const std::string& type, int n_bars) {
    const auto& prog = kProgressions[static_cast<std::size_t>(rng_.uniform(0, static_cast<int>(kProgressions.size()) - 1))];
    const auto style = static_cast<AccStyle>(rng_.uniform(0, 3));
    const bool detached = rng_.coin(0.3);
    bool melody = false, lead = false, acc = false;
    if (type == "i" || type == "o") {
      acc = true;
    } else if (type == "B") {
      melody = lead = acc = true;
    } else if (type == "x") {
      lead = acc = true;
    } else if (type == "X") {
      melody = lead = true;
    } else {
      melody = acc = true;
    }
    SectionMaterial m;
    int melody_pitch = degree_pitch(root_, rng_.uniform(0, 6), 6);
    for (int b = 0; b < n_bars; ++b) {
      const int chord = prog[static_cast<std::size_t>(b % 4)];
      Bar bar;
      if (melody) bar.phrases.push_back(make_melody(chord, detached, melody_pitch));
      if (lead && (rng_.coin(0.8) || b % 2 == 0)) bar.phrases.push_back(make_lead(chord));
      if (acc) bar.phrases.push_back(make_accompaniment(chord, style));
      m.bars.push_back(normalize_bar(std::move(bar)));
    }
    return m;
  }

 private:
  Phrase make_melody(int chord, bool detached, int& pitch) {
    Phrase p{PhraseKind::kNotes, kSyntheticMelody, with_gap_durations(rng_.pick(kMelodyRhythms), detached)};
    for (Note& n : p.notes) {
      if (n.onset % 24 == 0) {
        const int target = pitch + rng_.uniform(-5, 5);
        pitch = degree_pitch(root_, nearest_chord_degree(root_, chord, 6, target), 6);
      } else {
        // Step through the scale from the current pitch.
        int d = nearest_chord_degree(root_, chord, 6, pitch) + rng_.uniform(-2, 2);
        pitch = degree_pitch(root_, d, 6);
      }
      pitch = std::clamp(pitch, 60, 84);
      n.pitch = pitch;
    }
    return p;
  }

  Phrase make_lead(int chord) {
    Phrase p{PhraseKind::kNotes, kSyntheticLead, {}};
    const auto& rhythm = rng_.pick(kLeadRhythms);
    for (int onset : rhythm) {
      const int d = nearest_chord_degree(root_, chord, 6, degree_pitch(root_, rng_.uniform(7, 12), 6));
      p.notes.push_back(Note{onset, std::clamp(degree_pitch(root_, d, 6), 72, 91), rng_.coin(0.5) ? 12 : 24});
    }
    return p;
  }

  Phrase make_accompaniment(int chord, AccStyle style) {
    Phrase p{PhraseKind::kNotes, kSyntheticAccompaniment, {}};
    const auto degs = chord_degrees(chord);
    const int bass = degree_pitch(root_, chord, 3);
    auto triad = [&](int onset, int dur) {
      for (int d : degs) p.notes.push_back(Note{onset, degree_pitch(root_, d, 4), dur});
    };
    switch (style) {
      case AccStyle::kBlock:
        for (int onset : {0, 24}) {
          p.notes.push_back(Note{onset, bass, 24});
          triad(onset, 24);
        }
        break;
      case AccStyle::kArpeggio: {
        const std::array<int, 8> cycle = {0, 1, 2, 1, 0, 1, 2, 1};
        for (int i = 0; i < 8; ++i) {
          const int pitch = i == 0 ? bass : degree_pitch(root_, degs[static_cast<std::size_t>(cycle[static_cast<std::size_t>(i)])], 4);
          p.notes.push_back(Note{6 * i, pitch, 6});
        }
        break;
      }
      case AccStyle::kPulse:
        for (int onset : {0, 12, 24, 36}) triad(onset, 12);
        break;
      case AccStyle::kBassChord:
        p.notes.push_back(Note{0, bass, 24});
        p.notes.push_back(Note{24, bass, 24});
        triad(12, 12);
        triad(36, 12);
        break;
    }
    return p;
  }

  Rng rng_;
  int root_ = 0;
};

void check_spec(const CorpusSpec& spec) {
  if (spec.layouts.empty()) throw ConfigError("corpus spec has no layouts");
  if (!spec.weights.empty() && spec.weights.size() != spec.layouts.size()) {
    throw ConfigError("corpus spec weights do not match layouts");
  }
  for (const auto& layout : spec.layouts) {
    if (layout.empty()) throw ConfigError("empty section layout");
    for (const auto& s : layout) {
      if (s.type.empty() || s.n_bars < 1) throw ConfigError("bad section in layout " + format_layout(layout));
    }
    if (layout_bars(layout) > kMaxBars) {
      throw ConfigError("layout " + format_layout(layout) + " exceeds " + std::to_string(kMaxBars) + " bars");
    }
  }
}

}  // namespace

std::vector<AnnotatedSong> generate_synthetic_corpus(std::uint64_t seed, int n_songs, const CorpusSpec& spec) {
  check_spec(spec);
  if (n_songs < 0) throw ConfigError("n_songs must be non-negative");
  std::vector<double> weights = spec.weights;
  if (weights.empty()) weights.assign(spec.layouts.size(), 1.0);

  std::vector<AnnotatedSong> corpus;
  corpus.reserve(static_cast<std::size_t>(n_songs));
  for (int i = 0; i < n_songs; ++i) {
    // Independent stream per song so songs can be generated in any order.
    std::mt19937_64 pick_rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(i) * 0xBF58476D1CE4E5B9ULL + 1);
    std::discrete_distribution<std::size_t> layout_dist(weights.begin(), weights.end());
    const auto& layout = spec.layouts[layout_dist(pick_rng)];

    SongBuilder builder(pick_rng());
    std::map<std::string, int> longest;
    for (const auto& s : layout) longest[s.type] = std::max(longest[s.type], s.n_bars);
    std::map<std::string, SectionMaterial> material;
    for (const auto& s : layout) {
      if (!material.count(s.type)) material.emplace(s.type, builder.make_section(s.type, longest[s.type]));
    }

    AnnotatedSong song;
    char id[32];
    std::snprintf(id, sizeof id, "song_%04d", i);
    song.id = id;
    song.layout = layout;
    song.song.melody_instrument = kSyntheticMelody;
    for (const auto& s : layout) {
      const auto& bars = material.at(s.type).bars;
      song.song.bars.insert(song.song.bars.end(), bars.begin(), bars.begin() + s.n_bars);
    }
    corpus.push_back(std::move(song));
  }
  return corpus;
}

CorpusSpec default_corpus_spec() {
  CorpusSpec spec;
  for (const char* l : {"i-4,A-8,B-8,A-8,B-8,o-4", "i-4,A-8,A-8,B-8,o-4", "A-8,B-8,x-4,A-8,B-8",
                        "i-2,A-4,B-4,A-4,B-4,o-2", "i-4,A-8,B-8,X-4,B-8,o-4", "A-4,A-4,B-8,x-2,B-8",
                        "i-4,A-4,B-4,x-4,A-4,B-4,B-4,o-4"}) {
    spec.layouts.push_back(parse_layout(l));
  }
  return spec;
}

std::string format_annotations(const std::vector<AnnotatedSong>& corpus) {
  std::string out;
  for (const auto& s : corpus) out += s.id + " " + format_layout(s.layout) + "\n";
  return out;
}

}  // namespace phrasegen::symbolic
