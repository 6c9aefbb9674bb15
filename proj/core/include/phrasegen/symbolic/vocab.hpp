#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace phrasegen::symbolic {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

inline constexpr int kPositionsPerBar = 48;  // 12 per quarter note in 4/4
inline constexpr int kMaxDuration = 48;
inline constexpr int kMinPitch = 1;
inline constexpr int kMaxPitch = 128;
inline constexpr int kNumInstruments = 129;  // 128 GM programs + drums
inline constexpr int kDrumInstrument = 128;
inline constexpr int kNumSentinels = 16;
inline constexpr int kNumQueries = 4;
inline constexpr int kMaxBars = 128;

enum class TokenKind {
  kPad,
  kBos,
  kEos,
  kEndOfBar,
  kEndOfSong,
  kQuery,
  kSentinel,
  kInstrument,
  kOnset,
  kPitch,
  kDuration,
};

namespace tok {
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kEndOfBar = 3;
inline constexpr TokenId kEndOfSong = 4;
inline constexpr TokenId kQueryBase = 5;
inline constexpr TokenId kSentinelBase = kQueryBase + kNumQueries;
inline constexpr TokenId kInstrumentBase = kSentinelBase + kNumSentinels;
inline constexpr TokenId kOnsetBase = kInstrumentBase + kNumInstruments;
inline constexpr TokenId kPitchBase = kOnsetBase + kPositionsPerBar;  // p-1
inline constexpr TokenId kDurationBase = kPitchBase + kMaxPitch;      // d-1
inline constexpr TokenId kVocabSize = kDurationBase + kMaxDuration;
}  // namespace tok

TokenId instrument_token(int instrument);
TokenId onset_token(int onset);
TokenId pitch_token(int pitch);
TokenId duration_token(int duration);
TokenId query_token(int index);
TokenId sentinel_token(int index);

bool is_valid_token(TokenId id) noexcept;
TokenKind kind_of(TokenId id);

/// Numeric payload of a parameterised token (instrument id, onset, pitch,
/// duration, query or sentinel index). Zero for the fixed specials.
int value_of(TokenId id);

/// Text name, e.g. "I-0", "o-12", "p-60", "d-12", "END_OF_BAR".
std::string token_name(TokenId id);
TokenId parse_token_name(std::string_view name);

/// Hex digest of the ordered token-name list. Stored in every checkpoint and
/// cache so that stages built against different vocabularies refuse to mix.
const std::string& vocab_hash();

}  // namespace phrasegen::symbolic
