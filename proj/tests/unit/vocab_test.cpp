#include <gtest/gtest.h>

#include "phrasegen/errors.hpp"
#include "phrasegen/symbolic/vocab.hpp"

using namespace phrasegen;
using namespace phrasegen::symbolic;

TEST(Vocab, SizeCoversAllTokenFamilies) {
  EXPECT_EQ(tok::kVocabSize, 5 + kNumQueries + kNumSentinels + kNumInstruments + kPositionsPerBar + kMaxPitch + kMaxDuration);
}

TEST(Vocab, NamesRoundTripForEveryToken) {
  for (TokenId id = 0; id < tok::kVocabSize; ++id) {
    EXPECT_EQ(parse_token_name(token_name(id)), id) << token_name(id);
  }
}

TEST(Vocab, ParameterisedTokens) {
  EXPECT_EQ(token_name(instrument_token(0)), "I-0");
  EXPECT_EQ(token_name(onset_token(47)), "o-47");
  EXPECT_EQ(token_name(pitch_token(1)), "p-1");
  EXPECT_EQ(token_name(pitch_token(128)), "p-128");
  EXPECT_EQ(token_name(duration_token(48)), "d-48");
  EXPECT_EQ(token_name(query_token(3)), "Q4");
  EXPECT_EQ(token_name(sentinel_token(15)), "SENT-15");
  EXPECT_EQ(kind_of(instrument_token(kDrumInstrument)), TokenKind::kInstrument);
  EXPECT_EQ(value_of(pitch_token(64)), 64);
}

TEST(Vocab, RejectsOutOfRangeValues) {
  EXPECT_THROW(onset_token(48), VocabularyError);
  EXPECT_THROW(pitch_token(0), VocabularyError);
  EXPECT_THROW(duration_token(49), VocabularyError);
  EXPECT_THROW(instrument_token(129), VocabularyError);
  EXPECT_THROW(kind_of(tok::kVocabSize), VocabularyError);
  EXPECT_THROW(parse_token_name("x-1"), VocabularyError);
  EXPECT_THROW(parse_token_name("p-abc"), VocabularyError);
}

TEST(Vocab, HashIsStable) {
  EXPECT_EQ(vocab_hash().size(), 16u);
  EXPECT_EQ(vocab_hash(), vocab_hash());
}
