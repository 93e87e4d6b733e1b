// Copyright 2026 The aclora Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace aclora::detail {

/// Suffix array by prefix doubling, O(N log^2 N). Symbols are arbitrary
/// non-negative integers.
inline std::vector<std::size_t> suffix_array(std::span<const std::int64_t> text) {
  const std::size_t n = text.size();
  std::vector<std::size_t> sa(n);
  std::iota(sa.begin(), sa.end(), 0);
  std::vector<std::int64_t> rank(text.begin(), text.end());
  std::vector<std::int64_t> next(n);
  for (std::size_t len = 1;; len <<= 1) {
    auto key = [&](std::size_t i) {
      return std::pair{rank[i], i + len < n ? rank[i + len] : std::int64_t{-1}};
    };
    std::sort(sa.begin(), sa.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
    if (n == 0) break;
    next[sa[0]] = 0;
    for (std::size_t i = 1; i < n; ++i) {
      next[sa[i]] = next[sa[i - 1]] + (key(sa[i - 1]) < key(sa[i]) ? 1 : 0);
    }
    rank.swap(next);
    if (static_cast<std::size_t>(rank[sa[n - 1]]) == n - 1) break;
  }
  return sa;
}

/// Kasai et al.: lcp[i] = LCP(suffix sa[i], suffix sa[i+1]), size N-1.
inline std::vector<std::size_t> lcp_array(std::span<const std::int64_t> text, std::span<const std::size_t> sa) {
  const std::size_t n = text.size();
  if (n < 2) return {};
  std::vector<std::size_t> inv(n);
  for (std::size_t i = 0; i < n; ++i) inv[sa[i]] = i;
  std::vector<std::size_t> lcp(n - 1, 0);
  std::size_t h = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (inv[i] + 1 == n) {
      h = 0;
      continue;
    }
    const std::size_t j = sa[inv[i] + 1];
    while (i + h < n && j + h < n && text[i + h] == text[j + h]) ++h;
    lcp[inv[i]] = h;
    if (h > 0) --h;
  }
  return lcp;
}

}  // namespace aclora::detail
