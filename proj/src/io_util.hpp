//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Internal little-endian blob helpers shared by model and dataset IO.
#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "json.hpp"
#include "kse/error.hpp"

namespace kse::detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  out.push_back(static_cast<std::uint8_t>(u & 0xff));
  out.push_back(static_cast<std::uint8_t>((u >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((u >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((u >> 24) & 0xff));
}

// Sequential reader over a byte buffer. Exhaustion reports a truncation
// parse error naming `what`.
class BlobReader {
 public:
  BlobReader(const std::uint8_t* data, std::size_t size, std::string what)
      : data_(data), size_(size), what_(std::move(what)) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return size_ - pos_; }

  void require(std::size_t n) const {
    if (remaining() < n)
      fail(errc::parse, what_ + ": blob truncated (need " + std::to_string(n) +
                            " more bytes at offset " + std::to_string(pos_) +
                            ", have " + std::to_string(remaining()) + ")");
  }

  std::uint8_t u8() {
    require(1);
    return data_[pos_++];
  }

  std::uint16_t u16() {
    require(2);
    std::uint16_t v = static_cast<std::uint16_t>(
        data_[pos_] | (static_cast<std::uint16_t>(data_[pos_ + 1]) << 8));
    pos_ += 2;
    return v;
  }

  float f32() {
    require(4);
    std::uint32_t u = static_cast<std::uint32_t>(data_[pos_]) |
                      (static_cast<std::uint32_t>(data_[pos_ + 1]) << 8) |
                      (static_cast<std::uint32_t>(data_[pos_ + 2]) << 16) |
                      (static_cast<std::uint32_t>(data_[pos_ + 3]) << 24);
    pos_ += 4;
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }

  void seek(std::size_t pos) {
    if (pos > size_)
      fail(errc::parse, what_ + ": offset " + std::to_string(pos) +
                            " beyond blob end " + std::to_string(size_));
    pos_ = pos;
  }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::string what_;
};

void write_file_bytes(const std::string& path,
                      const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_text(const std::string& path, const std::string& text);
std::string read_file_text(const std::string& path);

// Parses JSON text; syntax errors surface as errc::parse naming `what`.
nlohmann::json parse_json(const std::string& text, const std::string& what);

// Typed field access with parse errors on absence or wrong type.
const nlohmann::json& require_field(const nlohmann::json& j,
                                    const std::string& key,
                                    const std::string& what);
std::int64_t require_int(const nlohmann::json& j, const std::string& key,
                         const std::string& what);
std::string require_string(const nlohmann::json& j, const std::string& key,
                           const std::string& what);
bool optional_bool(const nlohmann::json& j, const std::string& key,
                   bool fallback);

}  // namespace kse::detail
