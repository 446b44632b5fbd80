//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
#include "kse/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kse/analysis.hpp"
#include "kse/inference.hpp"
#include "kse/parallel.hpp"

namespace kse {
namespace {

Plane2D channel_sum(const FeatureStack& x) {
  Plane2D sum(x.height(), x.width());
  for (std::size_t p = 0; p < sum.size(); ++p) {
    double acc = 0.0;
    for (int c = 0; c < x.channels(); ++c)
      acc += static_cast<double>(x.channel(c)[p]);
    sum.v[p] = static_cast<float>(acc);
  }
  return sum;
}

Plane2D plane_of_channel(const FeatureStack& x, int c) {
  Plane2D p(x.height(), x.width());
  std::span<const float> src = x.channel(c);
  std::copy(src.begin(), src.end(), p.v.begin());
  return p;
}

// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values) {
  std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] != values[b] ? values[a] < values[b] : a < b;
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

long ReceptiveMask::area() const {
  long count = 0;
  for (std::uint8_t v : mask) count += v;
  return count;
}

Plane2D heat_map(const ModelGraph& m, const FeatureStack& image, int workers) {
  int last = m.last_conv_layer();
  if (last < 0)
    fail(errc::invalid_argument, "heat map needs a model with a conv layer");
  FeatureStack captured;
  forward_dense(m, image, workers,
                [&](int i, const FeatureStack&, const FeatureStack& out) {
                  if (i == last) captured = out;
                });
  return bilinear_upscale(channel_sum(captured), image.height(),
                          image.width());
}

ReceptiveMask receptive_mask(const Plane2D& feature_map, int input_h,
                             int input_w, double quantile) {
  if (!(quantile > 0.0 && quantile < 1.0))
    fail(errc::invalid_argument, "quantile must lie in (0, 1)");
  Plane2D up = bilinear_upscale(feature_map, input_h, input_w);
  std::vector<float> sorted = up.v;
  std::sort(sorted.begin(), sorted.end());
  std::size_t m_count = sorted.size();
  std::size_t idx = static_cast<std::size_t>(
      std::floor((1.0 - quantile) * static_cast<double>(m_count - 1)));
  if (idx >= m_count) idx = m_count - 1;
  float threshold = sorted[idx];

  ReceptiveMask mask;
  mask.height = input_h;
  mask.width = input_w;
  mask.quantile = quantile;
  mask.mask.resize(up.size());
  for (std::size_t p = 0; p < up.size(); ++p)
    mask.mask[p] = up.v[p] > threshold ? 1 : 0;  // strict: constant map -> empty
  return mask;
}

ImportanceStats feature_importance(const ReceptiveMask& mask,
                                   const Plane2D& heat) {
  if (mask.height != heat.height || mask.width != heat.width)
    fail(errc::shape, "mask and heat map dims do not match");
  ImportanceStats stats;
  double score = 0.0;
  for (std::size_t p = 0; p < heat.size(); ++p) {
    if (!mask.mask[p]) continue;
    score += static_cast<double>(heat.v[p]);
    ++stats.area;
  }
  stats.score = score;
  stats.richness = stats.area > 0 ? score / static_cast<double>(stats.area) : 0.0;
  return stats;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    fail(errc::invalid_argument, "spearman inputs must have equal length");
  if (x.size() < 2)
    fail(errc::invalid_argument, "spearman needs at least 2 samples");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
      fail(errc::invalid_argument, "spearman inputs must be finite");

  std::vector<double> rx = average_ranks(x);
  std::vector<double> ry = average_ranks(y);
  double n = static_cast<double>(x.size());
  double mean = (n + 1.0) / 2.0;  // ranks always average to (n + 1) / 2
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dx = rx[i] - mean;
    double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    fail(errc::degenerate,
         "spearman is undefined for a constant vector (all ranks tied)");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationStudy correlation_study(const ModelGraph& m, const Dataset& images,
                                   int layer_index, double quantile,
                                   int k_neighbors, int workers) {
  if (m.has_compressed_payload())
    fail(errc::state, "the correlation study needs a dense model");
  m.validate();
  if (layer_index < 0 || layer_index >= static_cast<int>(m.layers.size()))
    fail(errc::invalid_argument, "study layer index out of range");
  const LayerSpec& layer = m.layers[static_cast<std::size_t>(layer_index)];
  if (!layer.weight_bearing())
    fail(errc::invalid_argument, "study layer must be weight-bearing");
  if (images.size() == 0) fail(errc::invalid_argument, "dataset is empty");
  images.validate();
  if (!(images.shape == m.input_shape))
    fail(errc::shape, "dataset shape " + images.shape.str() +
                          " does not match model input " +
                          m.input_shape.str());
  int last = m.last_conv_layer();
  if (last < 0)
    fail(errc::invalid_argument, "the study needs a model with a conv layer");

  int c_count = layer.in_channels();
  int h = m.input_shape.height, w = m.input_shape.width;
  std::size_t n_images = images.size();

  // Per-image, per-channel mask statistics; filled independently, reduced in
  // image order for determinism.
  std::vector<std::vector<double>> area(n_images);
  std::vector<std::vector<double>> richness(n_images);
  parallel_for(n_images, workers, [&](std::size_t img) {
    FeatureStack layer_input;
    FeatureStack last_out;
    forward_dense(m, images.images[img], 1,
                  [&](int i, const FeatureStack& in, const FeatureStack& out) {
                    if (i == layer_index) layer_input = in;
                    if (i == last) last_out = out;
                  });
    Plane2D heat = bilinear_upscale(channel_sum(last_out), h, w);
    area[img].resize(static_cast<std::size_t>(c_count));
    richness[img].resize(static_cast<std::size_t>(c_count));
    for (int c = 0; c < c_count; ++c) {
      ReceptiveMask mask =
          receptive_mask(plane_of_channel(layer_input, c), h, w, quantile);
      ImportanceStats stats = feature_importance(mask, heat);
      area[img][static_cast<std::size_t>(c)] = static_cast<double>(stats.area);
      richness[img][static_cast<std::size_t>(c)] = stats.richness;
    }
  });

  CorrelationStudy study;
  study.layer_id = layer_index;
  study.quantile = quantile;
  study.mean_area.assign(static_cast<std::size_t>(c_count), 0.0);
  study.mean_richness.assign(static_cast<std::size_t>(c_count), 0.0);
  for (std::size_t img = 0; img < n_images; ++img)
    for (int c = 0; c < c_count; ++c) {
      study.mean_area[static_cast<std::size_t>(c)] +=
          area[img][static_cast<std::size_t>(c)];
      study.mean_richness[static_cast<std::size_t>(c)] +=
          richness[img][static_cast<std::size_t>(c)];
    }
  for (int c = 0; c < c_count; ++c) {
    study.mean_area[static_cast<std::size_t>(c)] /=
        static_cast<double>(n_images);
    study.mean_richness[static_cast<std::size_t>(c)] /=
        static_cast<double>(n_images);
  }

  const WeightTensor& weights = *layer.weights;
  std::vector<double> sparsity(static_cast<std::size_t>(c_count));
  std::vector<double> entropy(static_cast<std::size_t>(c_count));
  for (int c = 0; c < c_count; ++c) {
    sparsity[static_cast<std::size_t>(c)] = kernel_sparsity(weights, c);
    entropy[static_cast<std::size_t>(c)] =
        kernel_entropy(knn_distance_matrix(weights, c, k_neighbors));
  }
  study.rho_sparsity = spearman(sparsity, study.mean_area);
  study.rho_richness = spearman(entropy, study.mean_richness);
  return study;
}

}  // namespace kse
