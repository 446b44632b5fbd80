//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <stdexcept>
#include <string>

namespace kse {

// Error categories. Values mirror the kse_status codes of the C API.
enum class errc {
  invalid_argument = 1,
  io = 2,
  parse = 3,
  corrupt = 4,
  shape = 5,
  config = 6,
  state = 7,
  degenerate = 8,
  internal = 9,
};

const char* errc_name(errc code);

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& message) {
  throw error(code, message);
}

}  // namespace kse
