//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Model persistence: a human-readable JSON manifest (<base>.manifest.json)
// plus a single binary blob (<base>.bin). Dense payloads are raw
// little-endian float32. Compressed conv layers store, per layer section:
// the q array as unsigned 16-bit values, the centroid floats, then one
// bit-packed index stream per channel (ceil(log2 q_c) bits per entry,
// LSB-first, padded to a byte boundary per channel). Round trips are
// bit-exact in both directions.
#pragma once

#include <string>

#include "kse/model.hpp"

namespace kse {

// Path helpers: `base` may be given with or without the .manifest.json /
// .bin suffix.
std::string manifest_path(const std::string& base);
std::string blob_path(const std::string& base);

// Writes or reads either format; the manifest records which payload the
// file carries.
void save_model(const ModelGraph& m, const std::string& base);
ModelGraph load_model(const std::string& base);

// Format-checked variants.
void save_dense(const ModelGraph& m, const std::string& base);
ModelGraph load_dense(const std::string& base);
void save_compressed(const ModelGraph& m, const std::string& base);
ModelGraph load_compressed(const std::string& base);

// Exact on-disk cost of one compressed conv layer's blob section in bits
// (q array + centroids + byte-padded index streams).
std::uint64_t compressed_section_bits(const CompressedLayer& layer);

}  // namespace kse
