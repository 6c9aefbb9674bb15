#include "phrasegen/symbolic/song.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <numeric>

#include "phrasegen/errors.hpp"
#include "phrasegen/symbolic/vocab.hpp"

namespace phrasegen::symbolic {

bool note_precedes(const Note& a, const Note& b) noexcept {
  if (a.onset != b.onset) return a.onset < b.onset;
  return a.pitch > b.pitch;
}

double average_pitch(const Phrase& phrase) {
  if (phrase.notes.empty()) return 0.0;
  const double sum = std::accumulate(phrase.notes.begin(), phrase.notes.end(), 0.0,
                                     [](double acc, const Note& n) { return acc + n.pitch; });
  return sum / static_cast<double>(phrase.notes.size());
}

bool phrase_precedes(const Phrase& a, const Phrase& b) {
  // Compare exact rationals so that ties are ties regardless of rounding.
  const long long sa = std::accumulate(a.notes.begin(), a.notes.end(), 0LL,
                                       [](long long s, const Note& n) { return s + n.pitch; });
  const long long sb = std::accumulate(b.notes.begin(), b.notes.end(), 0LL,
                                       [](long long s, const Note& n) { return s + n.pitch; });
  const long long lhs = sa * static_cast<long long>(b.notes.size());
  const long long rhs = sb * static_cast<long long>(a.notes.size());
  if (lhs != rhs) return lhs > rhs;
  return a.instrument < b.instrument;
}

Phrase normalize_phrase(Phrase phrase) {
  if (phrase.is_special()) {
    phrase.notes.clear();
    phrase.instrument = 0;
    return phrase;
  }
  std::map<std::pair<int, int>, int> cells;
  for (const Note& n : phrase.notes) {
    const int dur = std::clamp(n.duration, 1, kMaxDuration);
    auto [it, inserted] = cells.try_emplace({n.onset, -n.pitch}, dur);
    if (!inserted) it->second = std::max(it->second, dur);
  }
  phrase.notes.clear();
  for (const auto& [key, dur] : cells) phrase.notes.push_back(Note{key.first, -key.second, dur});
  return phrase;
}

Bar normalize_bar(Bar bar) {
  std::map<int, Phrase> by_instrument;
  for (Phrase& p : bar.phrases) {
    if (p.is_special()) continue;
    auto [it, inserted] = by_instrument.try_emplace(p.instrument, Phrase{PhraseKind::kNotes, p.instrument, {}});
    it->second.notes.insert(it->second.notes.end(), p.notes.begin(), p.notes.end());
  }
  Bar out;
  for (auto& [inst, p] : by_instrument) {
    Phrase norm = normalize_phrase(std::move(p));
    if (!norm.notes.empty()) out.phrases.push_back(std::move(norm));
  }
  std::sort(out.phrases.begin(), out.phrases.end(), phrase_precedes);
  return out;
}

void validate_phrase(const Phrase& phrase) {
  if (phrase.is_special()) {
    if (!phrase.notes.empty()) throw GrammarError("special phrase carries notes");
    return;
  }
  if (phrase.instrument < 0 || phrase.instrument >= kNumInstruments) {
    throw GrammarError("instrument id " + std::to_string(phrase.instrument) + " out of range");
  }
  if (phrase.notes.empty()) throw GrammarError("phrase has no notes");
  for (std::size_t i = 0; i < phrase.notes.size(); ++i) {
    const Note& n = phrase.notes[i];
    if (n.onset < 0 || n.onset >= kPositionsPerBar) throw GrammarError("onset out of range");
    if (n.pitch < kMinPitch || n.pitch > kMaxPitch) throw GrammarError("pitch out of range");
    if (n.duration < 1 || n.duration > kMaxDuration) throw GrammarError("duration out of range");
    if (i > 0 && !note_precedes(phrase.notes[i - 1], n)) {
      throw GrammarError("notes not in onset-ascending, pitch-descending order");
    }
  }
}

void validate_bar(const Bar& bar) {
  for (std::size_t i = 0; i < bar.phrases.size(); ++i) {
    const Phrase& p = bar.phrases[i];
    if (p.is_special()) throw GrammarError("special phrase inside a bar");
    validate_phrase(p);
    for (std::size_t j = 0; j < i; ++j) {
      if (bar.phrases[j].instrument == p.instrument) throw GrammarError("instrument repeated within bar");
    }
    if (i > 0 && !phrase_precedes(bar.phrases[i - 1], p)) {
      throw GrammarError("phrases not in average-pitch-descending order");
    }
  }
}

void validate_song(const Song& song, bool ldm_bound) {
  if (ldm_bound && (song.bars.empty() || song.bars.size() > static_cast<std::size_t>(kMaxBars))) {
    throw GrammarError("song must have between 1 and 128 bars, got " + std::to_string(song.bars.size()));
  }
  for (const Bar& b : song.bars) validate_bar(b);
}

int note_count(const Song& song) {
  int n = 0;
  for (const Bar& b : song.bars)
    for (const Phrase& p : b.phrases) n += static_cast<int>(p.notes.size());
  return n;
}

std::string format_layout(const std::vector<Section>& layout) {
  std::string out;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (i) out.push_back(',');
    out += layout[i].type + "-" + std::to_string(layout[i].n_bars);
  }
  return out;
}

std::vector<Section> parse_layout(const std::string& text) {
  std::vector<Section> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string::npos) end = text.size();
    std::string item = text.substr(pos, end - pos);
    std::erase_if(item, [](char c) { return c == ' ' || c == '\t'; });
    const auto dash = item.rfind('-');
    if (dash == std::string::npos || dash == 0 || dash + 1 == item.size()) {
      throw ConfigError("bad section '" + item + "', expected <type>-<bars>");
    }
    int bars = 0;
    auto [p, ec] = std::from_chars(item.data() + dash + 1, item.data() + item.size(), bars);
    if (ec != std::errc{} || p != item.data() + item.size() || bars < 1) {
      throw ConfigError("bad bar count in section '" + item + "'");
    }
    out.push_back(Section{item.substr(0, dash), bars});
    pos = end + 1;
  }
  return out;
}

int layout_bars(const std::vector<Section>& layout) {
  int n = 0;
  for (const auto& s : layout) n += s.n_bars;
  return n;
}

}  // namespace phrasegen::symbolic
