#pragma once

#include "phrasegen/errors.hpp"

namespace phrasegen::symbolic {

/// Half-open bar-count interval [k*width, (k+1)*width).
struct LengthBucket {
  static constexpr int kWidth = 10;
  static constexpr int kMaxIndex = 12;  // covers bars 0..129

  int index = 0;

  static LengthBucket for_bars(int n_bars) {
    if (n_bars < 0) throw ConfigError("negative bar count");
    const int k = n_bars / kWidth;
    if (k > kMaxIndex) throw ConfigError("bar count " + std::to_string(n_bars) + " beyond the largest length bucket");
    return LengthBucket{k};
  }
  static LengthBucket checked(int k) {
    if (k < 0 || k > kMaxIndex) throw ConfigError("length bucket " + std::to_string(k) + " outside [0, 12]");
    return LengthBucket{k};
  }

  int lower() const noexcept { return index * kWidth; }
  int upper() const noexcept { return (index + 1) * kWidth; }
  bool contains(int n_bars) const noexcept { return n_bars >= lower() && n_bars < upper(); }

  friend bool operator==(const LengthBucket&, const LengthBucket&) = default;
};

}  // namespace phrasegen::symbolic
