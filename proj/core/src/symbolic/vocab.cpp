#include "phrasegen/symbolic/vocab.hpp"

#include <charconv>

#include "phrasegen/errors.hpp"
#include "phrasegen/hashing.hpp"

namespace phrasegen::symbolic {
namespace {

void check_range(int v, int lo, int hi, const char* what) {
  if (v < lo || v > hi) {
    throw VocabularyError(std::string(what) + " " + std::to_string(v) + " outside [" +
                          std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

int parse_int(std::string_view s, std::string_view whole) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw VocabularyError("unknown token name '" + std::string(whole) + "'");
  }
  return v;
}

}  // namespace

TokenId instrument_token(int instrument) {
  check_range(instrument, 0, kNumInstruments - 1, "instrument");
  return tok::kInstrumentBase + instrument;
}
TokenId onset_token(int onset) {
  check_range(onset, 0, kPositionsPerBar - 1, "onset");
  return tok::kOnsetBase + onset;
}
TokenId pitch_token(int pitch) {
  check_range(pitch, kMinPitch, kMaxPitch, "pitch");
  return tok::kPitchBase + (pitch - kMinPitch);
}
TokenId duration_token(int duration) {
  check_range(duration, 1, kMaxDuration, "duration");
  return tok::kDurationBase + (duration - 1);
}
TokenId query_token(int index) {
  check_range(index, 0, kNumQueries - 1, "query index");
  return tok::kQueryBase + index;
}
TokenId sentinel_token(int index) {
  check_range(index, 0, kNumSentinels - 1, "sentinel index");
  return tok::kSentinelBase + index;
}

bool is_valid_token(TokenId id) noexcept { return id >= 0 && id < tok::kVocabSize; }

TokenKind kind_of(TokenId id) {
  if (!is_valid_token(id)) throw VocabularyError("token id " + std::to_string(id) + " out of vocabulary");
  if (id == tok::kPad) return TokenKind::kPad;
  if (id == tok::kBos) return TokenKind::kBos;
  if (id == tok::kEos) return TokenKind::kEos;
  if (id == tok::kEndOfBar) return TokenKind::kEndOfBar;
  if (id == tok::kEndOfSong) return TokenKind::kEndOfSong;
  if (id < tok::kSentinelBase) return TokenKind::kQuery;
  if (id < tok::kInstrumentBase) return TokenKind::kSentinel;
  if (id < tok::kOnsetBase) return TokenKind::kInstrument;
  if (id < tok::kPitchBase) return TokenKind::kOnset;
  if (id < tok::kDurationBase) return TokenKind::kPitch;
  return TokenKind::kDuration;
}

int value_of(TokenId id) {
  switch (kind_of(id)) {
    case TokenKind::kQuery: return id - tok::kQueryBase;
    case TokenKind::kSentinel: return id - tok::kSentinelBase;
    case TokenKind::kInstrument: return id - tok::kInstrumentBase;
    case TokenKind::kOnset: return id - tok::kOnsetBase;
    case TokenKind::kPitch: return id - tok::kPitchBase + kMinPitch;
    case TokenKind::kDuration: return id - tok::kDurationBase + 1;
    default: return 0;
  }
}

std::string token_name(TokenId id) {
  const int v = value_of(id);
  switch (kind_of(id)) {
    case TokenKind::kPad: return "PAD";
    case TokenKind::kBos: return "BOS";
    case TokenKind::kEos: return "EOS";
    case TokenKind::kEndOfBar: return "END_OF_BAR";
    case TokenKind::kEndOfSong: return "END_OF_SONG";
    case TokenKind::kQuery: return "Q" + std::to_string(v + 1);
    case TokenKind::kSentinel: return "SENT-" + std::to_string(v);
    case TokenKind::kInstrument: return "I-" + std::to_string(v);
    case TokenKind::kOnset: return "o-" + std::to_string(v);
    case TokenKind::kPitch: return "p-" + std::to_string(v);
    case TokenKind::kDuration: return "d-" + std::to_string(v);
  }
  return {};
}

TokenId parse_token_name(std::string_view name) {
  if (name == "PAD") return tok::kPad;
  if (name == "BOS") return tok::kBos;
  if (name == "EOS") return tok::kEos;
  if (name == "END_OF_BAR") return tok::kEndOfBar;
  if (name == "END_OF_SONG") return tok::kEndOfSong;
  if (name.size() >= 2 && name[0] == 'Q') return query_token(parse_int(name.substr(1), name) - 1);
  if (name.starts_with("SENT-")) return sentinel_token(parse_int(name.substr(5), name));
  if (name.size() >= 3 && name[1] == '-') {
    const int v = parse_int(name.substr(2), name);
    switch (name[0]) {
      case 'I': return instrument_token(v);
      case 'o': return onset_token(v);
      case 'p': return pitch_token(v);
      case 'd': return duration_token(v);
      default: break;
    }
  }
  throw VocabularyError("unknown token name '" + std::string(name) + "'");
}

const std::string& vocab_hash() {
  static const std::string hash = [] {
    std::string all;
    for (TokenId id = 0; id < tok::kVocabSize; ++id) {
      all += token_name(id);
      all.push_back('\n');
    }
    return sha256_hex(all).substr(0, 16);
  }();
  return hash;
}

}  // namespace phrasegen::symbolic
