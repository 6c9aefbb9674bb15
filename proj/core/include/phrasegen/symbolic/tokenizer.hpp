#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "phrasegen/symbolic/song.hpp"
#include "phrasegen/symbolic/vocab.hpp"

namespace phrasegen::symbolic {

// Phrase grammar:  I-x (o-k (p-n d-m)+)+   with onsets strictly increasing and
// pitches strictly decreasing inside an onset group. The two special phrases
// are the single tokens END_OF_BAR and END_OF_SONG.
// Bar grammar:     phrase* END_OF_BAR       phrases ordered by average pitch.
// Song grammar:    bar+ END_OF_SONG

TokenSeq tokenize_phrase(const Phrase& phrase);
Phrase detokenize_phrase(std::span<const TokenId> tokens);

/// Emits phrases in canonical order followed by END_OF_BAR.
TokenSeq tokenize_bar(const Bar& bar);
Bar detokenize_bar(std::span<const TokenId> tokens);

TokenSeq tokenize_song(const Song& song);
Song detokenize_song(std::span<const TokenId> tokens, int melody_instrument);

enum class GrammarLevel { kPhrase, kBar, kSong };

struct GrammarViolation {
  std::ptrdiff_t token_index = -1;
  std::string message;
};

/// State-machine check of a token sequence, written independently of the
/// (de)tokenizers so that it can vouch for their output.
std::optional<GrammarViolation> check_grammar(std::span<const TokenId> tokens, GrammarLevel level);
inline bool is_grammatical(std::span<const TokenId> tokens, GrammarLevel level) {
  return !check_grammar(tokens, level).has_value();
}

/// Incremental phrase grammar, used to constrain decoding. Starts empty;
/// `complete()` tells whether the tokens pushed so far form a whole phrase.
class PhrasePrefix {
 public:
  bool allows(TokenId token) const noexcept;
  /// Throws GrammarError if the token is not allowed here.
  void push(TokenId token);
  bool complete() const noexcept;
  bool empty() const noexcept { return state_ == State::kStart; }

 private:
  enum class State { kStart, kInstrument, kOnset, kPitch, kDuration, kSpecial };
  State state_ = State::kStart;
  int onset_ = -1;
  int pitch_ = 0;
};

/// Whitespace-separated token names, e.g. "I-0 o-0 p-64 d-12".
std::string to_text(std::span<const TokenId> tokens);
TokenSeq from_text(const std::string& text);

/// One bar per line, END_OF_SONG on its own final line.
std::string song_to_text(const Song& song);

}  // namespace phrasegen::symbolic
