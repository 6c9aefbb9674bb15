#include <gtest/gtest.h>

#include <random>

#include "generators.hpp"
#include "phrasegen/errors.hpp"
#include "phrasegen/symbolic/midi.hpp"

using namespace phrasegen;
using namespace phrasegen::symbolic;

namespace {

// Minimal SMF builder for hand-made test files.
struct TrackBuilder {
  std::vector<std::uint8_t> bytes;
  void delta(std::uint32_t v) {
    std::vector<std::uint8_t> tmp{static_cast<std::uint8_t>(v & 0x7F)};
    while (v >>= 7) tmp.insert(tmp.begin(), static_cast<std::uint8_t>((v & 0x7F) | 0x80));
    bytes.insert(bytes.end(), tmp.begin(), tmp.end());
  }
  void event(std::uint32_t dt, std::initializer_list<std::uint8_t> data) {
    delta(dt);
    bytes.insert(bytes.end(), data);
  }
  void end() { event(0, {0xFF, 0x2F, 0x00}); }
};

std::vector<std::uint8_t> smf(int tpq, const std::vector<TrackBuilder>& tracks) {
  std::vector<std::uint8_t> out = {'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 1};
  out.push_back(0);
  out.push_back(static_cast<std::uint8_t>(tracks.size()));
  out.push_back(static_cast<std::uint8_t>(tpq >> 8));
  out.push_back(static_cast<std::uint8_t>(tpq & 0xFF));
  for (const auto& t : tracks) {
    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    const auto n = t.bytes.size();
    out.insert(out.end(), {static_cast<std::uint8_t>(n >> 24), static_cast<std::uint8_t>(n >> 16),
                           static_cast<std::uint8_t>(n >> 8), static_cast<std::uint8_t>(n)});
    out.insert(out.end(), t.bytes.begin(), t.bytes.end());
  }
  return out;
}

}  // namespace

TEST(IngestMidi, NoteOnBeatTwoQuantizesToOnsetTwelve) {
  TrackBuilder t;
  t.event(0, {0xC0, 0});
  t.event(480, {0x90, 60, 100});
  t.event(480, {0x80, 60, 0});
  t.end();
  const Song song = ingest_midi(smf(480, {t}));
  ASSERT_EQ(song.bars.size(), 1u);
  ASSERT_EQ(song.bars[0].phrases.size(), 1u);
  EXPECT_EQ(song.bars[0].phrases[0].notes, (std::vector<Note>{{12, 60, 12}}));
}

TEST(IngestMidi, SimultaneousNotesOrderedHighFirst) {
  TrackBuilder t;
  t.event(0, {0x90, 60, 100});
  t.event(0, {0x90, 64, 100});
  t.event(480, {0x80, 60, 0});
  t.event(0, {0x90, 64, 0});  // velocity-zero note-off, running status unused
  t.end();
  const Song song = ingest_midi(smf(480, {t}));
  const auto& notes = song.bars[0].phrases[0].notes;
  ASSERT_EQ(notes.size(), 2u);
  EXPECT_EQ(notes[0].pitch, 64);
  EXPECT_EQ(notes[1].pitch, 60);
}

TEST(IngestMidi, EmptyTrackEmitsNoPhrase) {
  TrackBuilder melody, empty;
  melody.event(0, {0xC0, 73});
  melody.event(0, {0x90, 72, 90});
  melody.event(960, {0x80, 72, 0});
  melody.end();
  empty.event(0, {0xC1, 0});
  empty.end();
  const Song song = ingest_midi(smf(480, {melody, empty}));
  ASSERT_EQ(song.bars.size(), 1u);
  ASSERT_EQ(song.bars[0].phrases.size(), 1u);
  EXPECT_EQ(song.bars[0].phrases[0].instrument, 73);
  EXPECT_EQ(song.melody_instrument, 73);
}

TEST(IngestMidi, RunningStatusAndDrums) {
  TrackBuilder t;
  t.event(0, {0x99, 36, 100});
  t.event(240, {36, 0});  // running status note-on velocity 0
  t.end();
  const Song song = ingest_midi(smf(480, {t}));
  EXPECT_EQ(song.bars[0].phrases[0].instrument, kDrumInstrument);
  EXPECT_EQ(song.bars[0].phrases[0].notes[0], (Note{0, 36, 6}));
}

TEST(IngestMidi, RejectsNonFourFour) {
  TrackBuilder t;
  t.event(0, {0xFF, 0x58, 0x04, 0x03, 0x02, 0x18, 0x08});
  t.end();
  EXPECT_THROW(ingest_midi(smf(480, {t})), UnsupportedMeterError);
}

TEST(IngestMidi, RejectsMalformed) {
  const std::vector<std::uint8_t> junk = {'M', 'T', 'h', 'x', 0, 0};
  EXPECT_THROW(ingest_midi(junk), MidiParseError);
  auto truncated = smf(480, {TrackBuilder{}});
  truncated.resize(truncated.size() - 1);
  truncated[truncated.size() - 1] = 0xFF;  // chunk length now overruns
  EXPECT_THROW(ingest_midi(truncated), MidiParseError);
}

TEST(IngestMidi, LongSongsRejectedOrTruncated) {
  TrackBuilder t;
  t.event(0, {0x90, 60, 100});
  t.event(480, {0x80, 60, 0});
  t.event(480 * 4 * 130, {0x90, 62, 100});
  t.event(480, {0x80, 62, 0});
  t.end();
  const auto bytes = smf(480, {t});
  EXPECT_THROW(ingest_midi(bytes), SongTooLongError);
  QuantizationConfig cfg;
  cfg.truncate_long_songs = true;
  EXPECT_EQ(ingest_midi(bytes, cfg).bars.size(), 128u);
}

TEST(IngestMidi, DurationsClampToOneBar) {
  TrackBuilder t;
  t.event(0, {0x90, 60, 100});
  t.event(480 * 8, {0x80, 60, 0});
  t.end();
  EXPECT_EQ(ingest_midi(smf(480, {t})).bars[0].phrases[0].notes[0].duration, kMaxDuration);
}

TEST(Quantize, IdempotentOnGrid) {
  for (int tpq : {96, 120, 480, 960}) {
    for (long pos = 0; pos < 48 * 8; ++pos) {
      const long tick = pos * tpq / 12;
      if (tick * 12 % tpq) continue;
      EXPECT_EQ(quantize_tick(tick, tpq), pos);
    }
  }
}

TEST(WriteMidi, RoundTripIsIdentityForGridSongs) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    Song song;
    song.melody_instrument = 73;
    const int n_bars = 1 + static_cast<int>(rng() % 12);
    for (int b = 0; b < n_bars; ++b) {
      Bar bar;
      for (int inst : {0, 26, 73}) {
        if (rng() % 3 == 0 && b + 1 != n_bars) continue;
        // Non-overlapping same-pitch notes: one note per onset slot of 12.
        Phrase p{PhraseKind::kNotes, inst, {}};
        for (int slot = 0; slot < 4; ++slot) {
          if (rng() % 2) continue;
          p.notes.push_back(Note{slot * 12, 40 + static_cast<int>(rng() % 50), 1 + static_cast<int>(rng() % 12)});
        }
        if (!p.notes.empty()) bar.phrases.push_back(p);
      }
      song.bars.push_back(normalize_bar(bar));
    }
    if (song.bars.back().phrases.empty()) continue;
    // The melody designation only survives if the melody instrument plays.
    bool has_melody = false;
    for (const Bar& b : song.bars)
      for (const Phrase& p : b.phrases) has_melody |= p.instrument == song.melody_instrument;
    if (!has_melody) continue;
    const Song back = ingest_midi(write_midi(song));
    ASSERT_EQ(back, song) << "trial " << trial;
    // Quantizing an already quantized song is the identity.
    ASSERT_EQ(ingest_midi(write_midi(back)), back);
  }
}

TEST(WriteMidi, RejectsBadResolution) { EXPECT_THROW(write_midi(Song{}, MidiWriteOptions{100, 120.0}), ConfigError); }
