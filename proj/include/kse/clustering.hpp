//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Turns KSE indicators into per-channel kernel budgets and clusters each
// channel's 2D kernels with k-means into centroids plus an index set.
#pragma once

#include <cstdint>
#include <vector>

#include "kse/analysis.hpp"
#include "kse/model.hpp"

namespace kse {

struct CompressionConfig {
  int granularity = 4;   // G, must be >= 2
  int shift = 0;         // T
  int k_neighbors = 5;
  double alpha = 1.0;
  std::uint64_t kmeans_seed = 0x6b7365ULL;
  int kmeans_max_iters = 100;
  double kmeans_tol = 1e-6;  // max centroid displacement
  int workers = 0;

  void validate() const;
};

struct ClusterResult {
  std::vector<std::vector<double>> centroids;  // q vectors of dimension d
  std::vector<std::uint16_t> assignments;      // N entries, 1-based
  double inertia = 0.0;                        // sum of squared distances
  std::vector<double> inertia_history;         // one value per Lloyd iteration
};

// Budget rule. Cases are evaluated in order: floor(v*G) = 0 prunes the
// channel, ceil(v*G) = G keeps all N kernels, otherwise
// q = ceil(N / 2^(G - ceil(v*G) + T)), clamped to [0, N].
int kernel_count(double v, int n_filters, const CompressionConfig& cfg);

// Lloyd k-means with distance-weighted (k-means++ style) seeding from
// cfg.kmeans_seed. Empty clusters are repaired by stealing the point
// farthest from its assigned centroid, so every cluster keeps at least one
// member. Inertia is non-increasing across iterations.
ClusterResult kmeans_kernels(const std::vector<std::vector<double>>& kernels,
                             int q, const CompressionConfig& cfg);

// Compresses one layer: per channel c, q_c = kernel_count(v_c, N);
// q_c = 0 prunes the channel, q_c = N copies the kernels verbatim with an
// identity index, anything else runs k-means over the channel's N kernels.
CompressedLayer compress_layer(const WeightTensor& w, const KseReport& report,
                               const CompressionConfig& cfg);

// Replaces the payload of every non-exempt weight-bearing layer. The input
// model must be dense; reports must come from analyze_model on it.
ModelGraph compress_model(const ModelGraph& m,
                          const std::vector<KseReport>& reports,
                          const CompressionConfig& cfg);

}  // namespace kse
