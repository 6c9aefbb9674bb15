#pragma once

#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "phrasegen/symbolic/length_bucket.hpp"
#include "phrasegen/symbolic/song.hpp"

namespace phrasegen::ldm {

/// Ordered (section type, bar count) list. Types come from a fixed
/// vocabulary: i, A, B, x, X, o.
struct StructurePrompt {
  std::vector<symbolic::Section> sections;

  int total_bars() const;
  bool empty() const noexcept { return sections.empty(); }
  /// Throws VocabularyError on an unknown type and ConfigError on a bad
  /// bar count or more than 128 bars in total.
  void validate() const;
  static StructurePrompt parse(const std::string& text);

  friend bool operator==(const StructurePrompt&, const StructurePrompt&) = default;
};

inline constexpr int kNumSectionTypes = 6;
/// Index of a section type in the fixed vocabulary; VocabularyError if unknown.
int section_type_id(const std::string& type);

/// Conditions for one song. Absent members mean "use the null embedding".
struct Conditions {
  std::optional<symbolic::LengthBucket> length;
  std::optional<StructurePrompt> structure;
};

/// Padded tensors for a batch of conditions.
struct ConditionBatch {
  torch::Tensor length_ids;     // [B]; LengthBucket::kMaxIndex + 1 is the null id
  torch::Tensor section_types;  // [B, S]
  torch::Tensor section_bars;   // [B, S]
  torch::Tensor section_mask;   // [B, S]; true on real sections
  torch::Tensor structure_null; // [B]; true where no structure was given
};

inline constexpr int kNullLengthId = symbolic::LengthBucket::kMaxIndex + 1;

ConditionBatch make_condition_batch(const std::vector<Conditions>& conds);

}  // namespace phrasegen::ldm
