#pragma once

#include <random>

#include "phrasegen/symbolic/vocab.hpp"

namespace phrasegen::vae {

struct SpanCorruptionParams {
  /// Expected fraction of tokens masked.
  double ratio = 0.3;
  /// Span lengths are max(1, Poisson(mean_span)).
  double mean_span = 3.0;
  /// Shorter sequences come back uncorrupted.
  int min_length = 2;
};

struct CorruptedPair {
  symbolic::TokenSeq input;
  symbolic::TokenSeq target;
  int masked = 0;
};

/// Masks random spans and collapses each masked run into one sentinel token
/// (S-0, S-1, ... in order; runs beyond the last sentinel reuse it). The
/// target is always the full original sequence. The number of masked
/// tokens is ratio * length rounded stochastically, so its mean is exact.
CorruptedPair corrupt_spans(const symbolic::TokenSeq& tokens, std::mt19937_64& rng,
                            const SpanCorruptionParams& params = {});

}  // namespace phrasegen::vae
