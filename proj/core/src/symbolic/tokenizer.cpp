#include "phrasegen/symbolic/tokenizer.hpp"

#include <algorithm>
#include <sstream>

#include "phrasegen/errors.hpp"

namespace phrasegen::symbolic {
namespace {

void append_phrase(TokenSeq& out, const Phrase& phrase) {
  if (phrase.kind == PhraseKind::kEndOfBar) {
    out.push_back(tok::kEndOfBar);
    return;
  }
  if (phrase.kind == PhraseKind::kEndOfSong) {
    out.push_back(tok::kEndOfSong);
    return;
  }
  validate_phrase(phrase);
  out.push_back(instrument_token(phrase.instrument));
  int current_onset = -1;
  for (const Note& n : phrase.notes) {
    if (n.onset != current_onset) {
      out.push_back(onset_token(n.onset));
      current_onset = n.onset;
    }
    out.push_back(pitch_token(n.pitch));
    out.push_back(duration_token(n.duration));
  }
}

// Parses one note-carrying phrase starting at `begin`; returns one past its end.
std::size_t parse_phrase_at(std::span<const TokenId> tokens, std::size_t begin, Phrase& out) {
  auto kind_at = [&](std::size_t i) {
    if (!is_valid_token(tokens[i])) throw GrammarError("token id out of vocabulary", static_cast<std::ptrdiff_t>(i));
    return kind_of(tokens[i]);
  };
  if (begin >= tokens.size()) throw GrammarError("missing instrument head", static_cast<std::ptrdiff_t>(begin));
  if (kind_at(begin) != TokenKind::kInstrument) {
    throw GrammarError("phrase must begin with an instrument token", static_cast<std::ptrdiff_t>(begin));
  }
  out = Phrase{PhraseKind::kNotes, value_of(tokens[begin]), {}};
  std::size_t i = begin + 1;
  int onset = -1;
  while (i < tokens.size()) {
    const TokenKind k = kind_at(i);
    if (k == TokenKind::kOnset) {
      const int o = value_of(tokens[i]);
      if (o <= onset) throw GrammarError("onset tokens not strictly increasing", static_cast<std::ptrdiff_t>(i));
      if (onset >= 0 && (out.notes.empty() || out.notes.back().onset != onset)) {
        throw GrammarError("onset without notes", static_cast<std::ptrdiff_t>(i - 1));
      }
      onset = o;
      ++i;
    } else if (k == TokenKind::kPitch) {
      if (onset < 0) throw GrammarError("pitch before any onset", static_cast<std::ptrdiff_t>(i));
      if (i + 1 >= tokens.size() || kind_at(i + 1) != TokenKind::kDuration) {
        throw GrammarError("pitch token not followed by a duration", static_cast<std::ptrdiff_t>(i));
      }
      const Note n{onset, value_of(tokens[i]), value_of(tokens[i + 1])};
      if (!out.notes.empty() && out.notes.back().onset == onset && out.notes.back().pitch <= n.pitch) {
        throw GrammarError("pitches at one onset must strictly decrease", static_cast<std::ptrdiff_t>(i));
      }
      out.notes.push_back(n);
      i += 2;
    } else if (k == TokenKind::kDuration) {
      throw GrammarError("duration without a preceding pitch", static_cast<std::ptrdiff_t>(i));
    } else {
      break;
    }
  }
  if (out.notes.empty()) throw GrammarError("phrase has no notes", static_cast<std::ptrdiff_t>(begin));
  if (out.notes.back().onset != onset) throw GrammarError("trailing onset without notes", static_cast<std::ptrdiff_t>(i - 1));
  return i;
}

// Parses phrases up to and including END_OF_BAR.
std::size_t parse_bar_at(std::span<const TokenId> tokens, std::size_t begin, Bar& out) {
  out = Bar{};
  std::size_t i = begin;
  while (true) {
    if (i >= tokens.size()) throw GrammarError("bar not terminated by END_OF_BAR", static_cast<std::ptrdiff_t>(i));
    if (tokens[i] == tok::kEndOfBar) return i + 1;
    const std::size_t head = i;
    Phrase p;
    i = parse_phrase_at(tokens, i, p);
    for (const Phrase& prev : out.phrases) {
      if (prev.instrument == p.instrument) throw GrammarError("instrument repeated within bar", static_cast<std::ptrdiff_t>(head));
    }
    if (!out.phrases.empty() && !phrase_precedes(out.phrases.back(), p)) {
      throw GrammarError("phrases not in average-pitch-descending order", static_cast<std::ptrdiff_t>(head));
    }
    out.phrases.push_back(std::move(p));
  }
}

}  // namespace

TokenSeq tokenize_phrase(const Phrase& phrase) {
  TokenSeq out;
  append_phrase(out, phrase);
  return out;
}

Phrase detokenize_phrase(std::span<const TokenId> tokens) {
  if (tokens.size() == 1 && tokens[0] == tok::kEndOfBar) return Phrase::end_of_bar();
  if (tokens.size() == 1 && tokens[0] == tok::kEndOfSong) return Phrase::end_of_song();
  Phrase p;
  const std::size_t end = parse_phrase_at(tokens, 0, p);
  if (end != tokens.size()) throw GrammarError("unexpected token after phrase", static_cast<std::ptrdiff_t>(end));
  return p;
}

TokenSeq tokenize_bar(const Bar& bar) {
  std::vector<const Phrase*> order;
  for (const Phrase& p : bar.phrases) {
    if (p.is_special()) throw GrammarError("special phrase inside a bar");
    order.push_back(&p);
  }
  std::stable_sort(order.begin(), order.end(), [](const Phrase* a, const Phrase* b) { return phrase_precedes(*a, *b); });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i - 1]->instrument == order[i]->instrument) throw GrammarError("instrument repeated within bar");
  }
  TokenSeq out;
  for (const Phrase* p : order) append_phrase(out, *p);
  out.push_back(tok::kEndOfBar);
  return out;
}

Bar detokenize_bar(std::span<const TokenId> tokens) {
  Bar b;
  const std::size_t end = parse_bar_at(tokens, 0, b);
  if (end != tokens.size()) throw GrammarError("unexpected token after END_OF_BAR", static_cast<std::ptrdiff_t>(end));
  return b;
}

TokenSeq tokenize_song(const Song& song) {
  TokenSeq out;
  for (const Bar& b : song.bars) {
    const TokenSeq bar = tokenize_bar(b);
    out.insert(out.end(), bar.begin(), bar.end());
  }
  out.push_back(tok::kEndOfSong);
  return out;
}

Song detokenize_song(std::span<const TokenId> tokens, int melody_instrument) {
  Song song;
  song.melody_instrument = melody_instrument;
  std::size_t i = 0;
  while (true) {
    if (i >= tokens.size()) throw GrammarError("song not terminated by END_OF_SONG", static_cast<std::ptrdiff_t>(i));
    if (tokens[i] == tok::kEndOfSong) {
      if (i + 1 != tokens.size()) throw GrammarError("tokens after END_OF_SONG", static_cast<std::ptrdiff_t>(i + 1));
      break;
    }
    Bar b;
    i = parse_bar_at(tokens, i, b);
    song.bars.push_back(std::move(b));
  }
  if (song.bars.empty()) throw GrammarError("song has no bars", 0);
  return song;
}

std::optional<GrammarViolation> check_grammar(std::span<const TokenId> tokens, GrammarLevel level) {
  enum class State { kPhraseStart, kAfterInstrument, kAfterOnset, kAfterPitch, kAfterDuration, kDone };
  auto fail = [](std::size_t i, std::string msg) {
    return std::optional<GrammarViolation>(GrammarViolation{static_cast<std::ptrdiff_t>(i), std::move(msg)});
  };
  if (tokens.empty()) return fail(0, "empty sequence");
  if (level == GrammarLevel::kPhrase && tokens.size() == 1 &&
      (tokens[0] == tok::kEndOfBar || tokens[0] == tok::kEndOfSong)) {
    return std::nullopt;
  }

  State state = State::kPhraseStart;
  int last_onset = -1, last_pitch = 0;
  long pitch_sum = 0, note_total = 0;
  // Sum/count of the previous phrase in the current bar, for ordering checks.
  long prev_sum = -1, prev_count = 0;
  int prev_instrument = -1;
  std::vector<int> bar_instruments;
  int current_instrument = -1;
  int bars = 0;

  auto close_phrase = [&](std::size_t i) -> std::optional<GrammarViolation> {
    if (state != State::kAfterDuration) return fail(i, "phrase ended mid-note or without notes");
    if (prev_count > 0) {
      const long lhs = prev_sum * note_total, rhs = pitch_sum * prev_count;
      if (lhs < rhs || (lhs == rhs && prev_instrument > current_instrument)) {
        return fail(i, "phrase order violates average-pitch rule");
      }
    }
    prev_sum = pitch_sum;
    prev_count = note_total;
    prev_instrument = current_instrument;
    return std::nullopt;
  };

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const TokenId t = tokens[i];
    if (!is_valid_token(t)) return fail(i, "token outside vocabulary");
    if (state == State::kDone) return fail(i, "tokens after terminator");
    const TokenKind k = kind_of(t);
    switch (k) {
      case TokenKind::kInstrument:
        if (state != State::kPhraseStart && state != State::kAfterDuration) return fail(i, "unexpected instrument");
        if (state == State::kAfterDuration) {
          if (level == GrammarLevel::kPhrase) return fail(i, "second instrument in a phrase");
          if (auto v = close_phrase(i)) return v;
        }
        current_instrument = value_of(t);
        if (std::find(bar_instruments.begin(), bar_instruments.end(), current_instrument) != bar_instruments.end()) {
          return fail(i, "instrument repeated within bar");
        }
        bar_instruments.push_back(current_instrument);
        pitch_sum = note_total = 0;
        last_onset = -1;
        state = State::kAfterInstrument;
        break;
      case TokenKind::kOnset:
        if (state != State::kAfterInstrument && state != State::kAfterDuration) return fail(i, "unexpected onset");
        if (value_of(t) <= last_onset) return fail(i, "onset not increasing");
        last_onset = value_of(t);
        last_pitch = kMaxPitch + 1;
        state = State::kAfterOnset;
        break;
      case TokenKind::kPitch:
        if (state != State::kAfterOnset && state != State::kAfterDuration) return fail(i, "unexpected pitch");
        if (value_of(t) >= last_pitch) return fail(i, "pitch not decreasing within onset");
        last_pitch = value_of(t);
        pitch_sum += last_pitch;
        ++note_total;
        state = State::kAfterPitch;
        break;
      case TokenKind::kDuration:
        if (state != State::kAfterPitch) return fail(i, "duration must follow a pitch");
        state = State::kAfterDuration;
        break;
      case TokenKind::kEndOfBar:
        if (level == GrammarLevel::kPhrase) return fail(i, "END_OF_BAR inside a phrase");
        if (state == State::kAfterDuration) {
          if (auto v = close_phrase(i)) return v;
        } else if (state != State::kPhraseStart) {
          return fail(i, "bar ended mid-phrase");
        }
        ++bars;
        bar_instruments.clear();
        prev_sum = -1;
        prev_count = 0;
        prev_instrument = -1;
        state = level == GrammarLevel::kBar ? State::kDone : State::kPhraseStart;
        break;
      case TokenKind::kEndOfSong:
        if (level != GrammarLevel::kSong) return fail(i, "END_OF_SONG outside song level");
        if (state != State::kPhraseStart || bars == 0) return fail(i, "song ended mid-bar or with no bars");
        state = State::kDone;
        break;
      default:
        return fail(i, "token kind not allowed in music sequences");
    }
  }
  if (level == GrammarLevel::kPhrase) {
    if (state != State::kAfterDuration) return fail(tokens.size(), "incomplete phrase");
  } else if (state != State::kDone) {
    return fail(tokens.size(), "missing terminator");
  }
  return std::nullopt;
}

std::string to_text(std::span<const TokenId> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += token_name(tokens[i]);
  }
  return out;
}

TokenSeq from_text(const std::string& text) {
  std::istringstream in(text);
  TokenSeq out;
  std::string word;
  while (in >> word) out.push_back(parse_token_name(word));
  return out;
}

std::string song_to_text(const Song& song) {
  std::string out;
  for (const Bar& b : song.bars) {
    out += to_text(tokenize_bar(b));
    out.push_back('\n');
  }
  out += "END_OF_SONG\n";
  return out;
}

bool PhrasePrefix::allows(TokenId token) const noexcept {
  if (!is_valid_token(token)) return false;
  const TokenKind kind = kind_of(token);
  switch (state_) {
    case State::kStart:
      return kind == TokenKind::kInstrument || token == tok::kEndOfBar || token == tok::kEndOfSong;
    case State::kInstrument:
      return kind == TokenKind::kOnset;
    case State::kOnset:
      return kind == TokenKind::kPitch;
    case State::kPitch:
      return kind == TokenKind::kDuration;
    case State::kDuration:
      return (kind == TokenKind::kPitch && value_of(token) < pitch_) ||
             (kind == TokenKind::kOnset && value_of(token) > onset_);
    case State::kSpecial:
      return false;
  }
  return false;
}

void PhrasePrefix::push(TokenId token) {
  if (!allows(token)) throw GrammarError("token " + token_name(token) + " not allowed here");
  const TokenKind kind = kind_of(token);
  switch (kind) {
    case TokenKind::kInstrument: state_ = State::kInstrument; break;
    case TokenKind::kOnset:
      onset_ = value_of(token);
      state_ = State::kOnset;
      break;
    case TokenKind::kPitch:
      pitch_ = value_of(token);
      state_ = State::kPitch;
      break;
    case TokenKind::kDuration: state_ = State::kDuration; break;
    default: state_ = State::kSpecial; break;
  }
}

bool PhrasePrefix::complete() const noexcept { return state_ == State::kDuration || state_ == State::kSpecial; }

}  // namespace phrasegen::symbolic
