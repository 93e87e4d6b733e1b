// Copyright 2026 The aclora Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>

#include "aclora/error.hpp"

namespace aclora {

/// Name of a low-rank adapter (one per permission zone). Restricted to
/// [A-Za-z0-9_.-]+ so ids are safe as file names and URL path segments.
class AdapterId {
 public:
  AdapterId() = default;
  explicit AdapterId(std::string value) : value_(std::move(value)) {
    if (!is_valid(value_)) throw Error(ErrorCode::kInvalidArgument, "invalid adapter id '" + value_ + "'");
  }

  static bool is_valid(std::string_view s) {
    if (s.empty()) return false;
    for (const char c : s) {
      const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' ||
                      c == '.' || c == '-';
      if (!ok) return false;
    }
    return true;
  }

  const std::string& str() const { return value_; }

  auto operator<=>(const AdapterId&) const = default;
  bool operator==(const AdapterId&) const = default;

 private:
  std::string value_;
};

inline std::ostream& operator<<(std::ostream& os, const AdapterId& id) { return os << id.str(); }

}  // namespace aclora

template <>
struct std::hash<aclora::AdapterId> {
  std::size_t operator()(const aclora::AdapterId& id) const noexcept { return std::hash<std::string>{}(id.str()); }
};
