#include "phrasegen/pipeline/latent_cache.hpp"

#include <bit>
#include <cstring>
#include <map>

#include <json.hpp>

#include "phrasegen/errors.hpp"
#include "phrasegen/pipeline/manifest.hpp"
#include "phrasegen/symbolic/vocab.hpp"

namespace phrasegen::pipeline {

static_assert(std::endian::native == std::endian::little, "latent files are written in native little-endian order");

std::vector<std::vector<std::vector<float>>> LatentCache::bar_latents(const CachedSong& song) const {
  const auto units = song_units(song).contiguous();
  std::vector<std::vector<std::vector<float>>> bars;
  int start = 0;
  for (int end : song.bar_ends) {
    std::vector<std::vector<float>> bar;
    for (int u = start; u < end - 1; ++u) {
      const float* row = units[u].data_ptr<float>();
      bar.emplace_back(row, row + units.size(1));
    }
    bars.push_back(std::move(bar));
    start = end;
  }
  return bars;
}

LatentCache build_cache(vae::PhraseCodec& codec, const PreparedCorpus& corpus, const std::string& vae_sha256) {
  using symbolic::TokenSeq;
  std::map<TokenSeq, std::int64_t> index;
  std::vector<TokenSeq> distinct;
  auto intern = [&](const TokenSeq& t) {
    auto [it, inserted] = index.try_emplace(t, static_cast<std::int64_t>(distinct.size()));
    if (inserted) distinct.push_back(t);
    return it->second;
  };
  const auto eob = intern({symbolic::tok::kEndOfBar});
  const auto eos = intern({symbolic::tok::kEndOfSong});

  LatentCache cache;
  std::vector<std::int64_t> rows;
  long phrases = 0, bars = 0;
  for (const auto& s : corpus.songs) {
    CachedSong c;
    c.id = s.id;
    c.split = s.split;
    c.layout = s.layout;
    c.n_bars = static_cast<int>(s.song.bars.size());
    c.melody_instrument = s.song.melody_instrument;
    c.offset = static_cast<std::int64_t>(rows.size());
    for (const auto& u : song_units(s.song)) {
      rows.push_back(intern(u));
      if (u.size() == 1 && u[0] == symbolic::tok::kEndOfBar) {
        c.bar_ends.push_back(static_cast<int>(rows.size() - static_cast<std::size_t>(c.offset)));
      } else {
        ++phrases;
      }
    }
    c.n_units = static_cast<std::int64_t>(rows.size()) - c.offset;
    bars += c.n_bars;
    cache.songs.push_back(std::move(c));
  }
  const auto table = codec.encode_mean(distinct).to(torch::kFloat32).contiguous();
  cache.latents = table.index_select(0, torch::tensor(rows, torch::kInt64)).contiguous();
  cache.end_of_bar = table[eob].clone();
  cache.end_of_song = table[eos].clone();
  cache.vocab_hash = symbolic::vocab_hash();
  cache.vae_sha256 = vae_sha256;
  cache.phrases_per_bar = bars > 0 ? static_cast<double>(phrases) / static_cast<double>(bars) : 0.0;
  return cache;
}

void write_latent_file(const torch::Tensor& latents, const std::filesystem::path& path) {
  const auto t = latents.to(torch::kFloat32).contiguous();
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(t.data_ptr<float>()),
                                           static_cast<std::size_t>(t.numel()) * sizeof(float)));
}

torch::Tensor read_latent_file(const std::filesystem::path& path, std::int64_t cols) {
  const auto bytes = read_file(path);
  const auto row_bytes = static_cast<std::size_t>(cols) * sizeof(float);
  if (cols < 1 || bytes.size() % row_bytes != 0)
    throw IntegrityError(path.string() + " is not a whole number of " + std::to_string(cols) + "-float rows");
  auto t = torch::empty({static_cast<std::int64_t>(bytes.size() / row_bytes), cols}, torch::kFloat32);
  std::memcpy(t.data_ptr<float>(), bytes.data(), bytes.size());
  return t;
}

void save_cache(const LatentCache& cache, const std::filesystem::path& dir) {
  write_latent_file(torch::cat({cache.end_of_bar.unsqueeze(0), cache.end_of_song.unsqueeze(0), cache.latents}),
                    dir / "latents.bin");
  nlohmann::json songs = nlohmann::json::array();
  for (const auto& s : cache.songs) {
    songs.push_back({{"id", s.id},
                     {"split", s.split},
                     {"layout", symbolic::format_layout(s.layout)},
                     {"n_bars", s.n_bars},
                     {"offset", s.offset},
                     {"n_units", s.n_units},
                     {"bar_ends", s.bar_ends},
                     {"melody_instrument", s.melody_instrument}});
  }
  nlohmann::json j{{"dim", cache.dim()},
                   {"rows", cache.latents.size(0)},
                   {"vocab_hash", cache.vocab_hash},
                   {"vae_sha256", cache.vae_sha256},
                   {"phrases_per_bar", cache.phrases_per_bar},
                   {"songs", songs}};
  write_file_atomic(dir / "manifest.json", j.dump(1) + "\n");
}

LatentCache load_cache(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "manifest.json") || !std::filesystem::exists(dir / "latents.bin"))
    throw MissingArtifactError("latent cache in " + dir.string() + " not found; run `phrasegen cache-latents` first");
  const auto j = nlohmann::json::parse(read_file(dir / "manifest.json"));
  LatentCache cache;
  cache.vocab_hash = j.at("vocab_hash").get<std::string>();
  if (cache.vocab_hash != symbolic::vocab_hash())
    throw IntegrityError("latent cache was built with vocabulary " + cache.vocab_hash + ", this build has " +
                         symbolic::vocab_hash());
  cache.vae_sha256 = j.at("vae_sha256").get<std::string>();
  cache.phrases_per_bar = j.at("phrases_per_bar").get<double>();
  const auto dim = j.at("dim").get<std::int64_t>();
  const auto rows = j.at("rows").get<std::int64_t>();
  auto all = read_latent_file(dir / "latents.bin", dim);
  if (all.size(0) != rows + 2) throw IntegrityError("latents.bin row count does not match its manifest");
  cache.end_of_bar = all[0].clone();
  cache.end_of_song = all[1].clone();
  cache.latents = all.narrow(0, 2, rows).clone();
  for (const auto& s : j.at("songs")) {
    CachedSong c;
    c.id = s.at("id").get<std::string>();
    c.split = s.at("split").get<std::string>();
    const auto layout = s.at("layout").get<std::string>();
    if (!layout.empty()) c.layout = symbolic::parse_layout(layout);
    c.n_bars = s.at("n_bars").get<int>();
    c.offset = s.at("offset").get<std::int64_t>();
    c.n_units = s.at("n_units").get<std::int64_t>();
    c.bar_ends = s.at("bar_ends").get<std::vector<int>>();
    c.melody_instrument = s.at("melody_instrument").get<int>();
    if (c.offset < 0 || c.offset + c.n_units > rows) throw IntegrityError("song " + c.id + " points outside latents.bin");
    cache.songs.push_back(std::move(c));
  }
  return cache;
}

}  // namespace phrasegen::pipeline
