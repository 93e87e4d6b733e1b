// Copyright 2026 The aclora Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "aclora/adapter_id.hpp"
#include "aclora/detail/container.hpp"
#include "json.hpp"

namespace aclora {

using GrantSet = std::set<AdapterId>;

/// Per-user grant sets. Unknown users have no grants. Grants are kept by id
/// rather than position, so adding or deleting adapters never renumbers
/// anyone's vector; stale grants to deleted adapters are left in place and
/// ignored by the caller.
class PermissionRegistry {
 public:
  PermissionRegistry() = default;
  PermissionRegistry(PermissionRegistry&& other) noexcept {
    std::unique_lock lock(other.mu_);
    grants_ = std::move(other.grants_);
  }

  void set_permissions(const std::string& user_id, GrantSet grants) {
    std::unique_lock lock(mu_);
    grants_.insert_or_assign(user_id, std::move(grants));
  }

  GrantSet lookup(const std::string& user_id) const {
    std::shared_lock lock(mu_);
    auto it = grants_.find(user_id);
    return it == grants_.end() ? GrantSet{} : it->second;
  }

  bool knows(const std::string& user_id) const {
    std::shared_lock lock(mu_);
    return grants_.contains(user_id);
  }

  std::size_t user_count() const {
    std::shared_lock lock(mu_);
    return grants_.size();
  }

  /// Positional view: bit i is set when the user holds the i-th id of `registered`.
  std::vector<bool> as_bit_vector(const std::string& user_id, const std::vector<AdapterId>& registered) const {
    const GrantSet g = lookup(user_id);
    std::vector<bool> bits;
    bits.reserve(registered.size());
    for (const auto& id : registered) bits.push_back(g.contains(id));
    return bits;
  }

  static std::string to_json_line(const std::string& user_id, const GrantSet& grants) {
    nlohmann::json j = {{"user_id", user_id}, {"grants", nlohmann::json::array()}};
    for (const auto& g : grants) j["grants"].push_back(g.str());
    return j.dump();
  }

  /// One JSON object per line, users in sorted order.
  void save(const std::filesystem::path& path) const {
    std::map<std::string, GrantSet> sorted;
    {
      std::shared_lock lock(mu_);
      sorted.insert(grants_.begin(), grants_.end());
    }
    std::string text;
    for (const auto& [user, grants] : sorted) text += to_json_line(user, grants) + "\n";
    detail::write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }

  /// Appends one record; on load the last line for a user wins.
  static void append(const std::filesystem::path& path, const std::string& user_id, const GrantSet& grants) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw Error(ErrorCode::kIo, "cannot append to " + path.string());
    out << to_json_line(user_id, grants) << '\n';
  }

  static PermissionRegistry load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
    PermissionRegistry reg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (is_blank(line)) continue;
      const auto j = nlohmann::json::parse(line, nullptr, false);
      try {
        if (j.is_discarded()) throw std::runtime_error("not JSON");
        GrantSet grants;
        for (const auto& g : j.at("grants")) grants.insert(AdapterId(g.get<std::string>()));
        reg.grants_.insert_or_assign(j.at("user_id").get<std::string>(), std::move(grants));
      } catch (const std::exception& e) {
        throw Error(ErrorCode::kCorruptFile, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    return reg;
  }

 private:
  static bool is_blank(const std::string& line) {
    return line.find_first_not_of(" \t\r\n") == std::string::npos;
  }

  std::unordered_map<std::string, GrantSet> grants_;
  mutable std::shared_mutex mu_;
};

/// Adapter-level candidate: an adapter id with its aggregate similarity.
struct ScoredAdapter {
  AdapterId id;
  double score = 0.0;

  bool operator==(const ScoredAdapter&) const = default;
};

struct Partition {
  std::vector<ScoredAdapter> permitted;  // O ∩ P
  std::vector<ScoredAdapter> denied;     // O \ P
};

/// Splits candidates by membership in `grants`, preserving scores and order.
inline Partition partition(const std::vector<ScoredAdapter>& candidates, const GrantSet& grants) {
  Partition out;
  for (const auto& c : candidates) {
    (grants.contains(c.id) ? out.permitted : out.denied).push_back(c);
  }
  return out;
}

}  // namespace aclora
