//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Kernel sparsity / kernel entropy analysis. For every input channel of a
// layer this computes the l1 sparsity of its 2D kernels, the Shannon entropy
// of the kNN density metric over those kernels, and combines both into the
// KSE importance indicator v = sqrt(s / (1 + alpha * e)) on min-max
// normalized values.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "kse/model.hpp"
#include "kse/tensor.hpp"

namespace kse {

// kNN distance matrix over the N kernels of one input channel. Row i holds
// the Euclidean distance to each of i's k nearest neighbors (self excluded,
// distance ties broken toward the lower index) and 0 elsewhere.
struct NeighborMatrix {
  int n = 0;
  int k = 0;  // effective neighbor count, min(requested, n - 1)
  std::vector<double> a;  // n * n, row-major

  double at(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }
  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
};

// Per-layer analysis record: raw and normalized sparsity/entropy vectors and
// the final indicator, all of length C.
struct KseReport {
  int layer_id = -1;
  std::string layer_name;
  int n_filters = 0;
  int in_channels = 0;
  int k_neighbors = 0;
  double alpha = 1.0;
  std::vector<double> sparsity_raw;   // s_c >= 0
  std::vector<double> entropy_raw;    // e_c in [0, log2 N]
  std::vector<double> sparsity_norm;  // in [0, 1]
  std::vector<double> entropy_norm;   // in [0, 1]
  std::vector<double> indicator;      // v_c in [0, 1]

  void validate() const;
};

// Sum of l1 norms of the N kernels attached to input channel c.
double kernel_sparsity(const WeightTensor& w, int c);

// kNN distance matrix for channel c. Requires N >= 2; k is clamped to N - 1.
NeighborMatrix knn_distance_matrix(const WeightTensor& w, int c, int k);

// Row sums of the neighbor matrix (the density metric of each kernel).
// Each row is summed in descending value order so the result is invariant
// under kernel permutation.
std::vector<double> density_metric(const NeighborMatrix& a);

// Base-2 Shannon entropy of the normalized density metric, with 0*log(0) = 0.
// When every kernel is identical (all dm = 0) this is log2(N), the uniform
// limit. Result is clamped to [0, log2 N].
double kernel_entropy(const NeighborMatrix& a);

// (x - min) / (max - min); a constant vector maps to all ones.
std::vector<double> minmax_normalize(std::span<const double> values);

// sqrt(s / (1 + alpha * e)) on normalized inputs.
double kse_indicator(double s_norm, double e_norm, double alpha);

// Full per-layer pipeline: raw vectors, per-layer min-max normalization,
// indicator, final min-max rescale of the indicator. Requires N >= 2.
KseReport analyze_layer(const WeightTensor& w, int k, double alpha);

// One report per non-exempt weight-bearing layer, in layer order. Results do
// not depend on the worker count.
std::vector<KseReport> analyze_model(const ModelGraph& m, int k, double alpha,
                                     int workers = 0);

// Report file: one JSON record per line per layer.
void save_reports(std::span<const KseReport> reports, const std::string& path);
std::vector<KseReport> load_reports(const std::string& path);

}  // namespace kse
