//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
#include "io_util.hpp"

#include <fstream>

namespace kse::detail {

void write_file_bytes(const std::string& path,
                      const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(errc::io, "cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  f.flush();
  if (!f) fail(errc::io, "write to '" + path + "' failed");
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(errc::io, "cannot open '" + path + "' for reading");
  f.seekg(0, std::ios::end);
  std::streamoff len = f.tellg();
  f.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(len));
  if (len > 0)
    f.read(reinterpret_cast<char*>(bytes.data()),
           static_cast<std::streamsize>(len));
  if (!f) fail(errc::io, "read from '" + path + "' failed");
  return bytes;
}

void write_file_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(errc::io, "cannot open '" + path + "' for writing");
  f << text;
  f.flush();
  if (!f) fail(errc::io, "write to '" + path + "' failed");
}

std::string read_file_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(errc::io, "cannot open '" + path + "' for reading");
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  if (f.bad()) fail(errc::io, "read from '" + path + "' failed");
  return text;
}

nlohmann::json parse_json(const std::string& text, const std::string& what) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) fail(errc::parse, what + ": malformed JSON");
  return j;
}

const nlohmann::json& require_field(const nlohmann::json& j,
                                    const std::string& key,
                                    const std::string& what) {
  auto it = j.find(key);
  if (it == j.end())
    fail(errc::parse, what + ": missing field '" + key + "'");
  return *it;
}

std::int64_t require_int(const nlohmann::json& j, const std::string& key,
                         const std::string& what) {
  const nlohmann::json& v = require_field(j, key, what);
  if (!v.is_number_integer())
    fail(errc::parse, what + ": field '" + key + "' must be an integer");
  return v.get<std::int64_t>();
}

std::string require_string(const nlohmann::json& j, const std::string& key,
                           const std::string& what) {
  const nlohmann::json& v = require_field(j, key, what);
  if (!v.is_string())
    fail(errc::parse, what + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

bool optional_bool(const nlohmann::json& j, const std::string& key,
                   bool fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_boolean())
    fail(errc::parse, "field '" + key + "' must be a boolean");
  return it->get<bool>();
}

}  // namespace kse::detail
