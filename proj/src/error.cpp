//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
#include "kse/error.hpp"

namespace kse {

const char* errc_name(errc code) {
  switch (code) {
    case errc::invalid_argument: return "invalid argument";
    case errc::io: return "io error";
    case errc::parse: return "parse error";
    case errc::corrupt: return "corrupt data";
    case errc::shape: return "shape error";
    case errc::config: return "config error";
    case errc::state: return "state error";
    case errc::degenerate: return "degenerate input";
    case errc::internal: return "internal error";
  }
  return "unknown error";
}

}  // namespace kse
