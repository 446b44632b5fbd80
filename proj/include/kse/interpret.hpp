//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Feature-map interpretation: heat map of an input image, top-quantile
// receptive-field masks, importance scores, and the Spearman study that
// relates feature-map statistics to kernel sparsity and entropy.
#pragma once

#include <span>
#include <vector>

#include "kse/dataset.hpp"
#include "kse/model.hpp"
#include "kse/tensor.hpp"

namespace kse {

// Binary receptive-field mask at input resolution.
struct ReceptiveMask {
  int height = 0;
  int width = 0;
  double quantile = 0.0;
  std::vector<std::uint8_t> mask;  // 0/1

  int at(int y, int x) const { return mask[std::size_t(y) * width + x]; }
  long area() const;
};

struct ImportanceStats {
  double score = 0.0;     // sum of heat * mask
  long area = 0;          // number of mask-1 pixels
  double richness = 0.0;  // score / area, 0 when the mask is empty
};

struct CorrelationStudy {
  int layer_id = -1;
  double quantile = 0.0;
  double rho_sparsity = 0.0;   // spearman(kernel sparsity, mean mask area)
  double rho_richness = 0.0;   // spearman(kernel entropy, mean richness)
  std::vector<double> mean_area;      // per input channel
  std::vector<double> mean_richness;  // per input channel
};

// Sums the last conv layer's output over channels and upscales it to the
// input resolution. The model must be dense and contain a conv layer.
Plane2D heat_map(const ModelGraph& m, const FeatureStack& image,
                 int workers = 0);

// Upscales a feature map to input resolution and thresholds it at the
// (1 - quantile) empirical quantile; mask = 1 where the value strictly
// exceeds the threshold (a constant map yields an empty mask).
ReceptiveMask receptive_mask(const Plane2D& feature_map, int input_h,
                             int input_w, double quantile);

// Importance of one feature map: mask/heat overlap score, receptive-field
// area, and information richness (their quotient).
ImportanceStats feature_importance(const ReceptiveMask& mask,
                                   const Plane2D& heat);

// Spearman rank correlation: average ranks for ties, then the
// product-moment formula on the ranks. Throws errc::degenerate when either
// rank vector is constant.
double spearman(std::span<const double> x, std::span<const double> y);

// For every input channel of the chosen dense conv layer, averages the
// receptive-field area and richness over the dataset, then correlates them
// with the channel's kernel sparsity and kernel entropy (k nearest
// neighbors as in the analysis module).
CorrelationStudy correlation_study(const ModelGraph& m, const Dataset& images,
                                   int layer_index, double quantile,
                                   int k_neighbors = 5, int workers = 0);

}  // namespace kse
