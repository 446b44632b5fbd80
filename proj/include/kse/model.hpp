//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Model graph: an ordered list of layer specs over dense or compressed
// convolution payloads. Fully-connected layers are represented as 1x1
// convolutions.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kse/tensor.hpp"

namespace kse {

enum class LayerKind { conv, fully_connected, residual_add, relu, pool_avg, flatten };

const char* layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);

// Clustered replacement for a dense weight tensor: per input channel c a
// budget q_c, q_c centroid kernels, and (when q_c >= 2) one 1-based centroid
// id per filter. Channels with q_c = 0 are pruned outright.
struct CompressedLayer {
  int n_filters = 0;
  int in_channels = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  std::vector<std::uint16_t> q;                   // length C
  std::vector<std::vector<float>> centroids;      // [c] -> q_c * Kh*Kw floats
  std::vector<std::vector<std::uint16_t>> index;  // [c] -> N ids in [1, q_c]; empty when q_c <= 1

  int kernel_size() const { return kernel_h * kernel_w; }
  // 1-based centroid id for (filter n, channel c); 0 when the channel is pruned.
  int centroid_id(int n, int c) const;
  std::span<const float> centroid(int c, int id /*1-based*/) const;
  std::span<float> centroid(int c, int id);
  std::uint64_t total_kernels() const;  // sum over c of q_c

  void validate() const;
  // Reconstructs the N x C x Kh x Kw tensor with W'[n,c] = centroid(c, id(n,c));
  // pruned channels expand to all-zero kernels.
  WeightTensor expand() const;
};

struct Shape3 {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  bool operator==(const Shape3&) const = default;
  std::string str() const;
};

struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  std::string name;
  ConvGeometry geometry;     // conv / fully_connected / pool_avg
  int pool_h = 0;            // pool_avg window
  int pool_w = 0;
  int residual_source = -1;  // residual_add: earlier layer index, -1 = model input
  bool compress_exempt = false;
  std::optional<WeightTensor> weights;
  std::optional<CompressedLayer> compressed;
  std::vector<float> bias;   // one per output channel; empty = no bias

  bool weight_bearing() const {
    return kind == LayerKind::conv || kind == LayerKind::fully_connected;
  }
  bool has_compressed_payload() const { return compressed.has_value(); }
  int out_channels() const;
  int in_channels() const;
  int kernel_h() const;
  int kernel_w() const;

  void validate(int own_index) const;
};

// Convenience constructors.
LayerSpec make_conv_layer(std::string name, WeightTensor w, ConvGeometry g,
                          std::vector<float> bias = {});
LayerSpec make_fc_layer(std::string name, int out_features, int in_features,
                        std::vector<float> weights, std::vector<float> bias = {});
LayerSpec make_relu_layer();
LayerSpec make_pool_avg_layer(int window_h, int window_w, ConvGeometry g);
LayerSpec make_flatten_layer();
LayerSpec make_residual_add_layer(int source_layer);

class ModelGraph {
 public:
  Shape3 input_shape;
  std::vector<LayerSpec> layers;
  std::map<std::string, std::string> metadata;

  bool has_compressed_payload() const;

  // Default compression policy: the first and last weight-bearing layers are
  // exempt. User-set flags on other layers are preserved.
  void apply_default_exemptions();

  // Validates layer invariants and forward-shape compatibility; returns the
  // output shape of every layer.
  std::vector<Shape3> propagate_shapes() const;
  Shape3 output_shape() const;

  // Index of the last LayerKind::conv layer, or -1 when there is none.
  int last_conv_layer() const;

  void validate() const;
};

}  // namespace kse
