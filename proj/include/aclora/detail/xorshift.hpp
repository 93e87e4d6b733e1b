// Copyright 2026 The aclora Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace aclora::detail {

/// xorshift64* (Vigna 2014). Used for every seeded initialization so weights
/// and synthetic corpora are reproducible bit-for-bit across platforms; the
/// std distributions are implementation-defined and cannot promise that.
class Xorshift64Star {
 public:
  explicit Xorshift64Star(std::uint64_t seed) : state_(seed ? seed : 0x9E3779B97F4A7C15ULL) {}

  std::uint64_t next() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1DULL;
  }

  /// Uniform float in [-1, 1), built from the top 24 bits so every value is
  /// exactly representable as float32.
  float uniform_symmetric() {
    const auto bits = static_cast<std::uint32_t>(next() >> 40);  // 24 bits
    return static_cast<float>(bits) / static_cast<float>(1U << 23) - 1.0F;
  }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) { return bound == 0 ? 0 : next() % bound; }

 private:
  std::uint64_t state_;
};

}  // namespace aclora::detail
