#include "phrasegen/pipeline/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "phrasegen/errors.hpp"
#include "phrasegen/pipeline/manifest.hpp"
#include "phrasegen/symbolic/midi.hpp"
#include "phrasegen/symbolic/synthetic.hpp"
#include "phrasegen/symbolic/tokenizer.hpp"

namespace phrasegen::pipeline {
namespace {

std::map<std::string, std::vector<symbolic::Section>> read_annotations(const std::filesystem::path& path) {
  std::map<std::string, std::vector<symbolic::Section>> out;
  if (path.empty()) return out;
  std::istringstream in(read_file(path));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string id, layout;
    if (!(ls >> id)) continue;
    if (!(ls >> layout)) throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": missing layout");
    out[id] = symbolic::parse_layout(layout);
  }
  return out;
}

struct Ingested {
  std::optional<CorpusEntry> entry;
  std::optional<Rejection> rejection;
};

Ingested ingest_one(const std::filesystem::path& file, const symbolic::QuantizationConfig& q) {
  const auto id = file.stem().string();
  try {
    const auto bytes = read_file(file);
    auto song = symbolic::ingest_midi(
        std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()), q);
    if (song.bars.empty()) return {std::nullopt, Rejection{id, "no bars"}};
    return {CorpusEntry{id, "", std::move(song), {}}, std::nullopt};
  } catch (const Error& e) {
    return {std::nullopt, Rejection{id, e.what()}};
  }
}

}  // namespace

std::vector<const CorpusEntry*> PreparedCorpus::split(const std::string& name) const {
  std::vector<const CorpusEntry*> out;
  for (const auto& s : songs)
    if (s.split == name) out.push_back(&s);
  return out;
}

int PreparedCorpus::melody_instrument() const {
  std::map<int, int> counts;
  for (const auto& s : songs) ++counts[s.song.melody_instrument];
  int best = 0, best_n = -1;
  for (const auto& [inst, n] : counts)
    if (n > best_n) best = inst, best_n = n;
  return best;
}

PreparedCorpus load_source(const CorpusSource& source) {
  PreparedCorpus out;
  if (source.kind == "synthetic") {
    for (auto& s : symbolic::generate_synthetic_corpus(source.synthetic_seed, source.synthetic_songs, source.synthetic_spec()))
      out.songs.push_back(CorpusEntry{s.id, "", std::move(s.song), std::move(s.layout)});
  } else if (source.kind == "midi") {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(source.midi_dir)) {
      auto ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (e.is_regular_file() && (ext == ".mid" || ext == ".midi")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    symbolic::QuantizationConfig q;
    q.truncate_long_songs = source.truncate_long_songs;
    q.melody_track = source.melody_track;
    // One worker per core, each taking every k-th file; results keep file order.
    const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<Ingested> results(files.size());
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < workers; ++w) {
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < files.size(); i += workers) results[i] = ingest_one(files[i], q);
      }));
    }
    for (auto& j : jobs) j.get();
    const auto annotations = read_annotations(source.annotations);
    for (auto& r : results) {
      if (r.rejection) {
        out.rejected.push_back(*r.rejection);
        continue;
      }
      auto it = annotations.find(r.entry->id);
      if (it != annotations.end()) r.entry->layout = it->second;
      out.songs.push_back(std::move(*r.entry));
    }
  } else {
    throw ConfigError("unknown corpus kind '" + source.kind + "'");
  }
  if (out.songs.empty()) throw EmptySongError("corpus is empty after ingestion");
  return out;
}

std::vector<bool> validation_mask(std::size_t n, double fraction, std::uint64_t seed) {
  std::vector<bool> mask(n, false);
  if (n < 2) return mask;
  auto k = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n)));
  k = std::clamp<std::size_t>(k, 1, n - 1);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // Fisher-Yates with our own draws so the split does not depend on the
  // standard library's shuffle.
  for (std::size_t i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng() % (i + 1)]);
  for (std::size_t i = 0; i < k; ++i) mask[idx[i]] = true;
  return mask;
}

void save_corpus(const PreparedCorpus& corpus, const std::filesystem::path& dir) {
  std::string text;
  for (const auto& s : corpus.songs) {
    nlohmann::json j{{"id", s.id},
                     {"split", s.split},
                     {"melody_instrument", s.song.melody_instrument},
                     {"layout", symbolic::format_layout(s.layout)},
                     {"bars", s.song.bars.size()},
                     {"tokens", symbolic::to_text(symbolic::tokenize_song(s.song))}};
    text += j.dump() + "\n";
  }
  write_file_atomic(dir / "corpus.jsonl", text);
  nlohmann::json rej = nlohmann::json::array();
  for (const auto& r : corpus.rejected) rej.push_back({{"id", r.id}, {"reason", r.reason}});
  write_file_atomic(dir / "rejected.json", rej.dump(2) + "\n");
}

PreparedCorpus load_corpus(const std::filesystem::path& dir) {
  const auto path = dir / "corpus.jsonl";
  if (!std::filesystem::exists(path))
    throw MissingArtifactError(path.string() + " not found; run `phrasegen prepare` first");
  PreparedCorpus out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      CorpusEntry e;
      e.id = j.at("id").get<std::string>();
      e.split = j.at("split").get<std::string>();
      const auto layout = j.at("layout").get<std::string>();
      if (!layout.empty()) e.layout = symbolic::parse_layout(layout);
      e.song = symbolic::detokenize_song(symbolic::from_text(j.at("tokens").get<std::string>()),
                                         j.at("melody_instrument").get<int>());
      out.songs.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw IntegrityError("corrupt corpus line in " + path.string() + ": " + e.what());
    }
  }
  if (std::filesystem::exists(dir / "rejected.json")) {
    for (const auto& r : nlohmann::json::parse(read_file(dir / "rejected.json")))
      out.rejected.push_back(Rejection{r.at("id").get<std::string>(), r.at("reason").get<std::string>()});
  }
  return out;
}

std::vector<symbolic::TokenSeq> song_units(const symbolic::Song& song) {
  std::vector<symbolic::TokenSeq> out;
  for (const auto& bar : song.bars) {
    for (const auto& p : symbolic::normalize_bar(bar).phrases) out.push_back(symbolic::tokenize_phrase(p));
    out.push_back({symbolic::tok::kEndOfBar});
  }
  return out;
}

std::vector<symbolic::TokenSeq> distinct_phrases(const std::vector<const CorpusEntry*>& songs) {
  std::set<symbolic::TokenSeq> seen;
  for (const auto* s : songs)
    for (const auto& bar : s->song.bars)
      for (const auto& p : bar.phrases) seen.insert(symbolic::tokenize_phrase(p));
  return {seen.begin(), seen.end()};
}

PhraseSplit phrase_split(const PreparedCorpus& corpus) {
  PhraseSplit out;
  out.train = distinct_phrases(corpus.split(kTrainSplit));
  out.train.push_back({symbolic::tok::kEndOfBar});
  out.train.push_back({symbolic::tok::kEndOfSong});
  std::sort(out.train.begin(), out.train.end());
  const std::set<symbolic::TokenSeq> train_set(out.train.begin(), out.train.end());
  const auto val_all = distinct_phrases(corpus.split(kValidationSplit));
  for (const auto& p : val_all)
    if (!train_set.count(p)) out.validation.push_back(p);
  if (out.validation.empty()) out.validation = val_all;
  if (out.validation.empty()) throw ConfigError("validation split has no phrases");
  return out;
}

}  // namespace phrasegen::pipeline
