#include "phrasegen/vae/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "phrasegen/errors.hpp"

namespace phrasegen::vae {

CorruptedPair corrupt_spans(const symbolic::TokenSeq& tokens, std::mt19937_64& rng,
                            const SpanCorruptionParams& params) {
  if (params.ratio < 0.0 || params.ratio > 1.0) throw ConfigError("corruption ratio must be in [0, 1]");
  if (params.mean_span <= 0.0) throw ConfigError("mean span length must be positive");
  CorruptedPair out{tokens, tokens, 0};
  const int n = static_cast<int>(tokens.size());
  if (n < params.min_length || params.ratio == 0.0) return out;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double exact = params.ratio * n;
  int target = static_cast<int>(std::floor(exact));
  if (unit(rng) < exact - target) ++target;
  target = std::min(target, n);
  if (target == 0) return out;

  std::poisson_distribution<int> span_len(params.mean_span);
  std::vector<bool> masked(static_cast<std::size_t>(n), false);
  int count = 0;
  while (count < target) {
    std::vector<int> free;
    for (int i = 0; i < n; ++i)
      if (!masked[i]) free.push_back(i);
    const int start = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
    int len = std::max(1, span_len(rng));
    for (int i = start; i < n && len > 0 && count < target; ++i) {
      if (masked[i]) continue;
      masked[i] = true;
      ++count;
      --len;
    }
  }

  out.input.clear();
  out.masked = count;
  int sentinel = 0;
  for (int i = 0; i < n; ++i) {
    if (!masked[i]) {
      out.input.push_back(tokens[i]);
    } else if (i == 0 || !masked[i - 1]) {
      out.input.push_back(symbolic::sentinel_token(std::min(sentinel, symbolic::kNumSentinels - 1)));
      ++sentinel;
    }
  }
  return out;
}

}  // namespace phrasegen::vae
