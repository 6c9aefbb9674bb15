#include "phrasegen/metrics/f1.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "phrasegen/symbolic/pianoroll.hpp"

namespace phrasegen::metrics {
namespace {

template <class Key, class Proj>
MatchCounts multiset_match(const symbolic::BarPianoRoll& pred, const symbolic::BarPianoRoll& ref, Proj proj) {
  std::map<Key, long> counts;
  for (const auto& [k, d] : ref.cells) ++counts[proj(k, d)];
  MatchCounts m;
  m.predicted = static_cast<long>(pred.cells.size());
  m.reference = static_cast<long>(ref.cells.size());
  for (const auto& [k, d] : pred.cells) {
    auto it = counts.find(proj(k, d));
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++m.matched;
    }
  }
  return m;
}

}  // namespace

double MatchCounts::f1() const noexcept {
  if (predicted == 0 && reference == 0) return 1.0;
  if (predicted == 0 || reference == 0) return 0.0;
  return 2.0 * static_cast<double>(matched) / static_cast<double>(predicted + reference);
}

BarF1 bar_f1(const symbolic::Bar& pred, const symbolic::Bar& ref) {
  using symbolic::RollKey;
  const auto p = symbolic::bar_to_pianoroll(pred);
  const auto r = symbolic::bar_to_pianoroll(ref);
  BarF1 out;
  out.op = multiset_match<std::tuple<int, int>>(p, r, [](const RollKey& k, int) { return std::tuple{k.onset, k.pitch}; });
  out.opd = multiset_match<std::tuple<int, int, int>>(
      p, r, [](const RollKey& k, int d) { return std::tuple{k.onset, k.pitch, d}; });
  out.iopd = multiset_match<std::tuple<int, int, int, int>>(
      p, r, [](const RollKey& k, int d) { return std::tuple{k.instrument, k.onset, k.pitch, d}; });
  return out;
}

F1Report f1_scores(const symbolic::Song& pred, const symbolic::Song& ref) {
  const std::size_t n = std::max(pred.bars.size(), ref.bars.size());
  const symbolic::Bar empty;
  F1Report report;
  MatchCounts op, opd, iopd;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pb = i < pred.bars.size() ? pred.bars[i] : empty;
    const auto& rb = i < ref.bars.size() ? ref.bars[i] : empty;
    BarF1 b = bar_f1(pb, rb);
    op += b.op;
    opd += b.opd;
    iopd += b.iopd;
    report.per_bar.push_back(b);
  }
  report.f1_op = op.f1();
  report.f1_opd = opd.f1();
  report.f1_iopd = iopd.f1();
  return report;
}

F1Report phrase_f1(const symbolic::Phrase& pred, const symbolic::Phrase& ref) {
  symbolic::Song a, b;
  a.bars.push_back(symbolic::Bar{pred.is_special() ? std::vector<symbolic::Phrase>{} : std::vector{pred}});
  b.bars.push_back(symbolic::Bar{ref.is_special() ? std::vector<symbolic::Phrase>{} : std::vector{ref}});
  return f1_scores(a, b);
}

}  // namespace phrasegen::metrics
