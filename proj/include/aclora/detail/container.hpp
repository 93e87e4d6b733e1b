// Copyright 2026 The aclora Authors
// SPDX-License-Identifier: Apache-2.0

// Shared on-disk layout for .acstore, .acadapter and .acmodel files:
//
//   magic[4] | version:u8 | manifest_len:u32le | manifest (JSON, UTF-8)
//   | blob_len:u64le | blob (float32le values) | crc32(blob):u32le
//
// The manifest repeats format_version and carries blob_crc32 so it can be
// inspected with ordinary text tools.

#pragma once

#include <zlib.h>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aclora/error.hpp"
#include "json.hpp"

namespace aclora::detail {

inline constexpr std::uint8_t kFormatVersion = 1;

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in bounded pieces.
  constexpr std::size_t kPiece = 1U << 30;
  for (std::size_t off = 0; off < bytes.size(); off += kPiece) {
    const auto len = static_cast<uInt>(std::min(kPiece, bytes.size() - off));
    crc = ::crc32(crc, bytes.data() + off, len);
  }
  return static_cast<std::uint32_t>(crc);
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(in[offset + i]) << (8 * i);
  }
  return value;
}

/// Accumulates float32 little-endian values.
class FloatBlob {
 public:
  void push(double value) {
    const auto f = static_cast<float>(value);
    put_le(bytes_, std::bit_cast<std::uint32_t>(f));
  }

  template <typename Range>
  void push_all(const Range& values) {
    for (const auto v : values) push(v);
  }

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::size_t count() const { return bytes_.size() / 4; }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Sequential float32 reader over a blob; every read is bounds-checked.
class FloatCursor {
 public:
  explicit FloatCursor(std::span<const std::uint8_t> blob) : blob_(blob) {}

  double next() {
    if (offset_ + 4 > blob_.size()) {
      throw Error(ErrorCode::kCorruptFile, "blob shorter than manifest declares");
    }
    const auto bits = get_le<std::uint32_t>(blob_, offset_);
    offset_ += 4;
    return static_cast<double>(std::bit_cast<float>(bits));
  }

  bool exhausted() const { return offset_ == blob_.size(); }

 private:
  std::span<const std::uint8_t> blob_;
  std::size_t offset_ = 0;
};

struct Container {
  nlohmann::json manifest;
  std::vector<std::uint8_t> blob;
};

inline std::vector<std::uint8_t> encode_container(std::array<char, 4> magic, nlohmann::json manifest,
                                                  const std::vector<std::uint8_t>& blob) {
  const std::uint32_t crc = crc32_of(blob);
  manifest["format_version"] = kFormatVersion;
  manifest["blob_crc32"] = crc;
  const std::string text = manifest.dump();

  std::vector<std::uint8_t> out;
  out.reserve(4 + 1 + 4 + text.size() + 8 + blob.size() + 4);
  out.insert(out.end(), magic.begin(), magic.end());
  out.push_back(kFormatVersion);
  put_le(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  put_le(out, static_cast<std::uint64_t>(blob.size()));
  out.insert(out.end(), blob.begin(), blob.end());
  put_le(out, crc);
  return out;
}

inline Container decode_container(std::array<char, 4> magic, std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kHeader = 4 + 1 + 4;
  if (bytes.size() < kHeader) throw Error(ErrorCode::kCorruptFile, "file truncated in header");
  if (!std::equal(magic.begin(), magic.end(), bytes.begin())) {
    throw Error(ErrorCode::kCorruptFile, "bad magic");
  }
  if (bytes[4] != kFormatVersion) {
    throw Error(ErrorCode::kFormatVersionMismatch,
                "file version " + std::to_string(bytes[4]) + ", expected " + std::to_string(kFormatVersion));
  }
  const auto manifest_len = get_le<std::uint32_t>(bytes, 5);
  std::size_t offset = kHeader;
  if (bytes.size() - offset < manifest_len + 8ULL) {
    throw Error(ErrorCode::kCorruptFile, "file truncated in manifest");
  }
  Container c;
  const std::string_view text(reinterpret_cast<const char*>(bytes.data() + offset), manifest_len);
  offset += manifest_len;
  const auto blob_len = get_le<std::uint64_t>(bytes, offset);
  offset += 8;
  if (bytes.size() - offset < 4 || bytes.size() - offset - 4 != blob_len) {
    throw Error(ErrorCode::kCorruptFile, "file truncated in blob");
  }
  c.blob.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                bytes.begin() + static_cast<std::ptrdiff_t>(offset + blob_len));
  offset += blob_len;
  const auto stored_crc = get_le<std::uint32_t>(bytes, offset);
  if (stored_crc != crc32_of(c.blob)) throw Error(ErrorCode::kCorruptFile, "blob checksum mismatch");

  c.manifest = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (c.manifest.is_discarded() || !c.manifest.is_object()) {
    throw Error(ErrorCode::kCorruptFile, "manifest is not a JSON object");
  }
  if (c.manifest.value("format_version", -1) != kFormatVersion) {
    throw Error(ErrorCode::kFormatVersionMismatch, "manifest format_version disagrees");
  }
  if (c.manifest.value("blob_crc32", std::uint64_t{0}) != stored_crc) {
    throw Error(ErrorCode::kCorruptFile, "manifest blob_crc32 disagrees with trailer");
  }
  return c;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes via a sibling temp file and rename so readers never see a torn file.
inline void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// Manifest field access that maps JSON type errors onto CorruptFile.
template <typename T>
T manifest_get(const nlohmann::json& manifest, const char* key) {
  try {
    return manifest.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptFile, std::string("manifest field '") + key + "': " + e.what());
  }
}

}  // namespace aclora::detail
