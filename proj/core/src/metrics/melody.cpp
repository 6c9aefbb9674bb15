#include "phrasegen/metrics/melody.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "phrasegen/errors.hpp"
#include "phrasegen/symbolic/vocab.hpp"

namespace phrasegen::metrics {

MelodyString melody_string(const symbolic::Song& song) {
  std::string text;
  bool any = false;
  for (const auto& bar : song.bars) {
    for (const auto& phrase : bar.phrases) {
      if (phrase.is_special() || phrase.instrument != song.melody_instrument) continue;
      any = any || !phrase.notes.empty();
      auto notes = phrase.notes;
      std::sort(notes.begin(), notes.end(), symbolic::note_precedes);
      for (const auto& note : notes) {
        text += symbolic::token_name(symbolic::onset_token(note.onset));
        text += ' ';
        text += symbolic::token_name(symbolic::pitch_token(note.pitch));
        text += ' ';
      }
    }
    text += "| ";
  }
  if (!any) return MelodyString{"", true};
  text.pop_back();
  return MelodyString{std::move(text), false};
}

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

long edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<long> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<long>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<long>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const long sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double wer(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
  if (ref.empty()) throw LengthError("WER reference is empty");
  return static_cast<double>(edit_distance(hyp, ref)) / static_cast<double>(ref.size());
}

double wer(std::string_view hyp, std::string_view ref) { return wer(split_tokens(hyp), split_tokens(ref)); }

MemorizationReport memorization_report(const std::vector<std::string>& generated,
                                       const std::vector<std::string>& training) {
  std::vector<std::vector<std::string>> refs;
  MemorizationReport report;
  for (const auto& t : training) {
    auto toks = split_tokens(t);
    if (toks.empty()) {
      ++report.skipped_references;
      continue;
    }
    refs.push_back(std::move(toks));
  }
  if (refs.empty()) throw LengthError("memorization_report needs at least one training melody");
  report.single_reference = refs.size() == 1;

  int memorized = 0;
  for (const auto& g : generated) {
    const auto hyp = split_tokens(g);
    SongMemorization s;
    double d1 = std::numeric_limits<double>::infinity();
    double d2 = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < refs.size(); ++r) {
      const double d = wer(hyp, refs[r]);
      if (d < d1) {
        d2 = d1;
        d1 = d;
        s.nearest = static_cast<int>(r);
      } else if (d < d2) {
        d2 = d;
      }
    }
    s.d1 = d1;
    s.mmr = std::max(0.0, 1.0 - d1);
    if (report.single_reference) {
      s.d2 = d1;
      s.t2r = 1.0;
    } else {
      s.d2 = d2;
      s.t2r = d2 == 0.0 ? 1.0 : d1 / d2;
    }
    s.memorized = s.t2r < kMemorizedRatio;
    memorized += s.memorized ? 1 : 0;
    report.songs.push_back(s);
  }
  report.mr = generated.empty() ? 0.0 : static_cast<double>(memorized) / static_cast<double>(generated.size());
  return report;
}

MemorizationReport memorization_report(const std::vector<symbolic::Song>& generated,
                                       const std::vector<symbolic::Song>& training) {
  std::vector<std::string> g, t;
  for (const auto& s : generated) g.push_back(melody_string(s).text);
  for (const auto& s : training) t.push_back(melody_string(s).text);
  return memorization_report(g, t);
}

double length_accuracy(const std::vector<int>& bar_counts, symbolic::LengthBucket bucket) {
  if (bar_counts.empty()) return 0.0;
  const auto hits = std::count_if(bar_counts.begin(), bar_counts.end(), [&](int n) { return bucket.contains(n); });
  return static_cast<double>(hits) / static_cast<double>(bar_counts.size());
}

double length_accuracy(const std::vector<symbolic::Song>& songs, symbolic::LengthBucket bucket) {
  std::vector<int> counts;
  for (const auto& s : songs) counts.push_back(static_cast<int>(s.bars.size()));
  return length_accuracy(counts, bucket);
}

}  // namespace phrasegen::metrics
