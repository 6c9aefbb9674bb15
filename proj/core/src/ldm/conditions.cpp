#include "phrasegen/ldm/conditions.hpp"

#include <algorithm>
#include <array>

#include "phrasegen/errors.hpp"
#include "phrasegen/symbolic/vocab.hpp"

namespace phrasegen::ldm {

namespace {
constexpr std::array<const char*, kNumSectionTypes> kSectionTypes = {"i", "A", "B", "x", "X", "o"};
}

int section_type_id(const std::string& type) {
  for (std::size_t i = 0; i < kSectionTypes.size(); ++i)
    if (type == kSectionTypes[i]) return static_cast<int>(i);
  throw VocabularyError("unknown section type '" + type + "'");
}

int StructurePrompt::total_bars() const {
  int n = 0;
  for (const auto& s : sections) n += s.n_bars;
  return n;
}

void StructurePrompt::validate() const {
  for (const auto& s : sections) {
    section_type_id(s.type);
    if (s.n_bars < 1 || s.n_bars > symbolic::kMaxBars) throw ConfigError("section bar count out of range");
  }
  if (total_bars() > symbolic::kMaxBars) throw ConfigError("structure prompt covers more than 128 bars");
}

StructurePrompt StructurePrompt::parse(const std::string& text) {
  StructurePrompt p{symbolic::parse_layout(text)};
  p.validate();
  return p;
}

ConditionBatch make_condition_batch(const std::vector<Conditions>& conds) {
  const auto b = static_cast<std::int64_t>(conds.size());
  std::int64_t s = 1;
  for (const auto& c : conds)
    if (c.structure) s = std::max<std::int64_t>(s, static_cast<std::int64_t>(c.structure->sections.size()));
  ConditionBatch out;
  out.length_ids = torch::full({b}, kNullLengthId, torch::kInt64);
  out.section_types = torch::zeros({b, s}, torch::kInt64);
  out.section_bars = torch::zeros({b, s}, torch::kInt64);
  out.section_mask = torch::zeros({b, s}, torch::kBool);
  out.structure_null = torch::ones({b}, torch::kBool);
  auto len = out.length_ids.accessor<std::int64_t, 1>();
  auto types = out.section_types.accessor<std::int64_t, 2>();
  auto bars = out.section_bars.accessor<std::int64_t, 2>();
  auto mask = out.section_mask.accessor<bool, 2>();
  auto null = out.structure_null.accessor<bool, 1>();
  for (std::int64_t i = 0; i < b; ++i) {
    const auto& c = conds[static_cast<std::size_t>(i)];
    if (c.length) len[i] = symbolic::LengthBucket::checked(c.length->index).index;
    if (c.structure && !c.structure->empty()) {
      c.structure->validate();
      null[i] = false;
      for (std::size_t j = 0; j < c.structure->sections.size(); ++j) {
        const auto& sec = c.structure->sections[j];
        types[i][static_cast<std::int64_t>(j)] = section_type_id(sec.type);
        bars[i][static_cast<std::int64_t>(j)] = sec.n_bars;
        mask[i][static_cast<std::int64_t>(j)] = true;
      }
    } else {
      mask[i][0] = true;  // the null memory slot
    }
  }
  return out;
}

}  // namespace phrasegen::ldm
