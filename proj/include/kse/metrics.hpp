//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Compression ratio r_comp = N*C*Kh*Kw / sum_c(q_c*Kh*Kw + N*log2(q_c)/32)
// and acceleration ratio r_acce = N*C / sum_c q_c, per layer and model-wide.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kse/model.hpp"

namespace kse {

struct LayerRatio {
  int layer_id = -1;
  std::string name;
  bool compressed = false;  // false: exempt / dense on both sides
  std::uint64_t params_dense = 0;          // weight count, biases excluded
  double params_compressed_bits = 0.0;     // exact log2 accounting
  std::uint64_t storage_bits_on_disk = 0;  // ceil-packed index streams
  double r_comp = 1.0;
  std::uint64_t flops_dense = 0;
  std::uint64_t flops_compressed = 0;
  double r_acce = 1.0;
  std::uint64_t sum_q = 0;
  std::uint64_t nc = 0;  // N * C
};

struct RatioReport {
  std::vector<LayerRatio> layers;
  std::uint64_t params_dense_total = 0;
  double params_compressed_bits_total = 0.0;
  std::uint64_t flops_dense_total = 0;
  std::uint64_t flops_compressed_total = 0;
  double r_comp_model = 1.0;  // from summed numerators/denominators
  double r_acce_model = 1.0;
  std::map<std::string, std::string> config_echo;  // G, T, alpha, k, seed
};

// Formula-level ratios for a single compressed layer. log2(q_c) counts as 0 for
// q_c <= 1; a fully pruned layer reports infinity (with a warning).
double compression_ratio(const CompressedLayer& layer);
double acceleration_ratio(const CompressedLayer& layer);

// Aggregates per-layer numbers for a dense model and its compressed
// counterpart (same architecture). Model-level ratios divide summed
// numerators by summed denominators; exempt layers enter both sides dense.
RatioReport model_report(const ModelGraph& dense, const ModelGraph& compressed,
                         const Shape3& input_shape);

// Table with FLOPs (r_acce) and #Param (r_comp) columns.
std::string render_report_text(const RatioReport& report);
// Machine-readable record per layer plus model totals.
std::string render_report_json(const RatioReport& report);

}  // namespace kse
