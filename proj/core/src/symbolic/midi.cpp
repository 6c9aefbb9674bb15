#include "phrasegen/symbolic/midi.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <map>

#include "phrasegen/errors.hpp"
#include "phrasegen/symbolic/vocab.hpp"

namespace phrasegen::symbolic {
namespace {

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  bool done() const { return pos_ >= data_.size(); }
  std::size_t pos() const { return pos_; }

  std::uint8_t u8() {
    if (pos_ >= data_.size()) throw MidiParseError("unexpected end of data at byte " + std::to_string(pos_));
    return data_[pos_++];
  }
  std::uint8_t peek() const {
    if (pos_ >= data_.size()) throw MidiParseError("unexpected end of data at byte " + std::to_string(pos_));
    return data_[pos_];
  }
  std::uint32_t be(int n) {
    std::uint32_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 8) | u8();
    return v;
  }
  std::uint32_t vlq() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      const std::uint8_t b = u8();
      v = (v << 7) | (b & 0x7F);
      if (!(b & 0x80)) return v;
    }
    throw MidiParseError("variable-length quantity longer than 4 bytes");
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (pos_ + n > data_.size()) throw MidiParseError("chunk overruns file");
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::string tag() {
    auto s = take(4);
    return std::string(s.begin(), s.end());
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

struct RawNote {
  long start = 0;
  long end = 0;
  int pitch = 0;
  int instrument = 0;
};

struct RawTrack {
  std::string name;
  std::vector<RawNote> notes;
};

RawTrack parse_track(std::span<const std::uint8_t> chunk) {
  ByteReader r(chunk);
  RawTrack track;
  std::array<int, 16> program{};
  // Pending note-ons per (channel, pitch), matched first-in first-out.
  std::map<std::pair<int, int>, std::deque<std::pair<long, int>>> open;
  long tick = 0;
  std::uint8_t status = 0;
  while (!r.done()) {
    tick += static_cast<long>(r.vlq());
    std::uint8_t b = r.peek();
    if (b & 0x80) {
      status = r.u8();
    } else if (status == 0) {
      throw MidiParseError("running status without a prior status byte");
    }
    if (status == 0xFF) {
      const std::uint8_t type = r.u8();
      const auto len = r.vlq();
      auto payload = r.take(len);
      if (type == 0x2F) break;
      if (type == 0x03) track.name.assign(payload.begin(), payload.end());
      if (type == 0x58) {
        if (payload.size() < 2) throw MidiParseError("short time-signature event");
        if (payload[0] != 4 || payload[1] != 2) {
          throw UnsupportedMeterError("time signature " + std::to_string(payload[0]) + "/" +
                                      std::to_string(1 << payload[1]) + " not supported, only 4/4");
        }
      }
      status = 0;  // meta events cancel running status
      continue;
    }
    if (status == 0xF0 || status == 0xF7) {
      r.take(r.vlq());
      status = 0;
      continue;
    }
    const int channel = status & 0x0F;
    switch (status & 0xF0) {
      case 0x80:
      case 0x90: {
        const int pitch = r.u8() & 0x7F;
        const int velocity = r.u8() & 0x7F;
        const bool on = (status & 0xF0) == 0x90 && velocity > 0;
        auto& queue = open[{channel, pitch}];
        if (on) {
          queue.emplace_back(tick, channel == 9 ? kDrumInstrument : program[channel]);
        } else if (!queue.empty()) {
          auto [start, inst] = queue.front();
          queue.pop_front();
          track.notes.push_back(RawNote{start, tick, pitch, inst});
        }
        break;
      }
      case 0xA0:
      case 0xB0:
      case 0xE0:
        r.u8();
        r.u8();
        break;
      case 0xC0:
        program[channel] = r.u8() & 0x7F;
        break;
      case 0xD0:
        r.u8();
        break;
      default:
        throw MidiParseError("unknown status byte " + std::to_string(status));
    }
  }
  for (auto& [key, queue] : open) {
    for (auto [start, inst] : queue) track.notes.push_back(RawNote{start, tick, key.second, inst});
  }
  return track;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

int dominant_instrument(const RawTrack& t) {
  std::map<int, int> counts;
  for (const RawNote& n : t.notes) ++counts[n.instrument];
  return std::max_element(counts.begin(), counts.end(), [](auto& a, auto& b) { return a.second < b.second; })->first;
}

void put_vlq(std::vector<std::uint8_t>& out, std::uint32_t v) {
  std::uint8_t buf[5];
  int n = 0;
  buf[n++] = v & 0x7F;
  while (v >>= 7) buf[n++] = static_cast<std::uint8_t>((v & 0x7F) | 0x80);
  while (n) out.push_back(buf[--n]);
}

void put_be(std::vector<std::uint8_t>& out, std::uint32_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_chunk(std::vector<std::uint8_t>& out, const char* tag, const std::vector<std::uint8_t>& body) {
  out.insert(out.end(), tag, tag + 4);
  put_be(out, static_cast<std::uint32_t>(body.size()), 4);
  out.insert(out.end(), body.begin(), body.end());
}

}  // namespace

long quantize_tick(long tick, int ticks_per_quarter) {
  // Round half up onto the 12-per-quarter grid.
  const long num = tick * 12L * 2L + ticks_per_quarter;
  return num / (2L * ticks_per_quarter);
}

Song ingest_midi(std::span<const std::uint8_t> bytes, const QuantizationConfig& config) {
  ByteReader r(bytes);
  if (bytes.size() < 14 || r.tag() != "MThd") throw MidiParseError("missing MThd header");
  const auto header_len = r.be(4);
  if (header_len < 6) throw MidiParseError("short MThd header");
  const int format = static_cast<int>(r.be(2));
  const int ntracks = static_cast<int>(r.be(2));
  const int division = static_cast<int>(r.be(2));
  r.take(header_len - 6);
  if (format > 1) throw MidiParseError("MIDI format " + std::to_string(format) + " not supported");
  if (division & 0x8000) throw MidiParseError("SMPTE time division not supported");
  if (division == 0) throw MidiParseError("zero ticks per quarter");

  std::vector<RawTrack> tracks;
  while (!r.done() && static_cast<int>(tracks.size()) < ntracks) {
    const std::string tag = r.tag();
    const auto len = r.be(4);
    auto chunk = r.take(len);
    if (tag == "MTrk") tracks.push_back(parse_track(chunk));
  }
  if (static_cast<int>(tracks.size()) != ntracks) throw MidiParseError("fewer MTrk chunks than declared");

  Song song;
  int melody_track = -1;
  if (config.melody_track) {
    if (*config.melody_track < 0 || *config.melody_track >= ntracks || tracks[*config.melody_track].notes.empty()) {
      throw MidiParseError("melody track " + std::to_string(*config.melody_track) + " missing or empty");
    }
    melody_track = *config.melody_track;
  } else {
    for (int i = 0; i < ntracks && melody_track < 0; ++i) {
      if (!tracks[i].notes.empty() && lower(tracks[i].name).find("melody") != std::string::npos) melody_track = i;
    }
    for (int i = 0; i < ntracks && melody_track < 0; ++i) {
      if (!tracks[i].notes.empty()) melody_track = i;
    }
  }
  if (melody_track >= 0) song.melody_instrument = dominant_instrument(tracks[melody_track]);

  std::map<long, Bar> bars;
  long last_bar = -1;
  for (const RawTrack& t : tracks) {
    for (const RawNote& n : t.notes) {
      if (n.pitch < kMinPitch) continue;  // MIDI pitch 0 has no token
      const long start = quantize_tick(n.start, division);
      const long end = quantize_tick(n.end, division);
      const long bar = start / kPositionsPerBar;
      const int onset = static_cast<int>(start % kPositionsPerBar);
      const int dur = static_cast<int>(std::clamp<long>(end - start, 1, kMaxDuration));
      Bar& b = bars[bar];
      auto it = std::find_if(b.phrases.begin(), b.phrases.end(), [&](const Phrase& p) { return p.instrument == n.instrument; });
      if (it == b.phrases.end()) {
        b.phrases.push_back(Phrase{PhraseKind::kNotes, n.instrument, {}});
        it = std::prev(b.phrases.end());
      }
      it->notes.push_back(Note{onset, n.pitch, dur});
      last_bar = std::max(last_bar, bar);
    }
  }
  if (last_bar + 1 > kMaxBars && !config.truncate_long_songs) {
    throw SongTooLongError("song has " + std::to_string(last_bar + 1) + " bars, limit is " + std::to_string(kMaxBars));
  }
  const long n_bars = std::min<long>(last_bar + 1, kMaxBars);
  song.bars.resize(static_cast<std::size_t>(n_bars));
  for (auto& [idx, b] : bars) {
    if (idx < n_bars) song.bars[static_cast<std::size_t>(idx)] = normalize_bar(std::move(b));
  }
  return song;
}

std::vector<std::uint8_t> write_midi(const Song& song, const MidiWriteOptions& options) {
  if (options.ticks_per_quarter <= 0 || options.ticks_per_quarter % 12 != 0) {
    throw ConfigError("ticks_per_quarter must be a positive multiple of 12");
  }
  const long ticks_per_step = options.ticks_per_quarter / 12;

  std::map<int, std::vector<std::pair<long, Note>>> by_instrument;
  for (std::size_t bi = 0; bi < song.bars.size(); ++bi) {
    for (const Phrase& p : song.bars[bi].phrases) {
      if (p.is_special()) continue;
      for (const Note& n : p.notes) by_instrument[p.instrument].emplace_back(static_cast<long>(bi), n);
    }
  }

  std::vector<std::uint8_t> out;
  put_chunk(out, "MThd", [&] {
    std::vector<std::uint8_t> h;
    put_be(h, 1, 2);
    put_be(h, static_cast<std::uint32_t>(1 + by_instrument.size()), 2);
    put_be(h, static_cast<std::uint32_t>(options.ticks_per_quarter), 2);
    return h;
  }());

  {
    std::vector<std::uint8_t> t;
    const auto us_per_quarter = static_cast<std::uint32_t>(std::lround(60'000'000.0 / options.bpm));
    put_vlq(t, 0);
    t.insert(t.end(), {0xFF, 0x51, 0x03});
    put_be(t, us_per_quarter, 3);
    put_vlq(t, 0);
    t.insert(t.end(), {0xFF, 0x58, 0x04, 0x04, 0x02, 0x18, 0x08});
    put_vlq(t, 0);
    t.insert(t.end(), {0xFF, 0x2F, 0x00});
    put_chunk(out, "MTrk", t);
  }

  // Melody first so that name-free readers still infer it.
  std::vector<int> order;
  if (by_instrument.count(song.melody_instrument)) order.push_back(song.melody_instrument);
  for (auto& [inst, notes] : by_instrument)
    if (inst != song.melody_instrument) order.push_back(inst);

  int next_channel = 0;
  for (int inst : order) {
    int channel = 9;
    if (inst != kDrumInstrument) {
      if (next_channel == 9) ++next_channel;
      channel = next_channel % 16;
      next_channel = (next_channel + 1) % 16;
    }
    struct Event {
      long tick;
      int order;  // note-offs (0) sort before note-ons (1) at the same tick
      std::uint8_t status, d1, d2;
    };
    std::vector<Event> events;
    for (const auto& [bar, n] : by_instrument[inst]) {
      const long start = (bar * kPositionsPerBar + n.onset) * ticks_per_step;
      const long end = start + n.duration * ticks_per_step;
      events.push_back({start, 1, static_cast<std::uint8_t>(0x90 | channel), static_cast<std::uint8_t>(std::min(n.pitch, 127)), 80});
      events.push_back({end, 0, static_cast<std::uint8_t>(0x80 | channel), static_cast<std::uint8_t>(std::min(n.pitch, 127)), 0});
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return std::tie(a.tick, a.order) < std::tie(b.tick, b.order); });

    std::vector<std::uint8_t> t;
    const std::string name = inst == song.melody_instrument ? "melody" : "inst-" + std::to_string(inst);
    put_vlq(t, 0);
    t.insert(t.end(), {0xFF, 0x03});
    put_vlq(t, static_cast<std::uint32_t>(name.size()));
    t.insert(t.end(), name.begin(), name.end());
    if (inst != kDrumInstrument) {
      put_vlq(t, 0);
      t.push_back(static_cast<std::uint8_t>(0xC0 | channel));
      t.push_back(static_cast<std::uint8_t>(inst & 0x7F));
    }
    long prev = 0;
    for (const Event& e : events) {
      put_vlq(t, static_cast<std::uint32_t>(e.tick - prev));
      prev = e.tick;
      t.insert(t.end(), {e.status, e.d1, e.d2});
    }
    put_vlq(t, 0);
    t.insert(t.end(), {0xFF, 0x2F, 0x00});
    put_chunk(out, "MTrk", t);
  }
  return out;
}

}  // namespace phrasegen::symbolic
