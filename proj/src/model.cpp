//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
#include "kse/model.hpp"

#include <algorithm>
#include <cmath>

namespace kse {

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::fully_connected: return "fully_connected";
    case LayerKind::residual_add: return "residual_add";
    case LayerKind::relu: return "relu";
    case LayerKind::pool_avg: return "pool_avg";
    case LayerKind::flatten: return "flatten";
  }
  return "unknown";
}

LayerKind layer_kind_from_name(const std::string& name) {
  if (name == "conv") return LayerKind::conv;
  if (name == "fully_connected") return LayerKind::fully_connected;
  if (name == "residual_add") return LayerKind::residual_add;
  if (name == "relu") return LayerKind::relu;
  if (name == "pool_avg") return LayerKind::pool_avg;
  if (name == "flatten") return LayerKind::flatten;
  fail(errc::parse, "unknown layer kind '" + name + "'");
}

std::string Shape3::str() const {
  return std::to_string(channels) + "x" + std::to_string(height) + "x" +
         std::to_string(width);
}

int CompressedLayer::centroid_id(int n, int c) const {
  if (n < 0 || n >= n_filters || c < 0 || c >= in_channels)
    fail(errc::invalid_argument, "centroid_id index out of range");
  if (q[c] == 0) return 0;
  if (q[c] == 1) return 1;
  return index[c][static_cast<std::size_t>(n)];
}

std::span<const float> CompressedLayer::centroid(int c, int id) const {
  if (c < 0 || c >= in_channels || id < 1 || id > q[c])
    fail(errc::invalid_argument, "centroid reference out of range");
  std::size_t ks = static_cast<std::size_t>(kernel_size());
  return {centroids[c].data() + static_cast<std::size_t>(id - 1) * ks, ks};
}

std::span<float> CompressedLayer::centroid(int c, int id) {
  if (c < 0 || c >= in_channels || id < 1 || id > q[c])
    fail(errc::invalid_argument, "centroid reference out of range");
  std::size_t ks = static_cast<std::size_t>(kernel_size());
  return {centroids[c].data() + static_cast<std::size_t>(id - 1) * ks, ks};
}

std::uint64_t CompressedLayer::total_kernels() const {
  std::uint64_t total = 0;
  for (std::uint16_t qc : q) total += qc;
  return total;
}

void CompressedLayer::validate() const {
  if (n_filters < 1 || in_channels < 1 || kernel_h < 1 || kernel_w < 1)
    fail(errc::invalid_argument, "compressed layer dims must all be >= 1");
  std::size_t c_count = static_cast<std::size_t>(in_channels);
  if (q.size() != c_count || centroids.size() != c_count ||
      index.size() != c_count)
    fail(errc::invalid_argument,
         "compressed layer per-channel containers must have length C");
  std::size_t ks = static_cast<std::size_t>(kernel_size());
  for (int c = 0; c < in_channels; ++c) {
    int qc = q[c];
    if (qc < 0 || qc > n_filters)
      fail(errc::invalid_argument,
           "q[" + std::to_string(c) + "] out of [0, N]");
    if (centroids[c].size() != static_cast<std::size_t>(qc) * ks)
      fail(errc::invalid_argument,
           "centroid storage of channel " + std::to_string(c) +
               " does not match q");
    for (float v : centroids[c])
      if (!std::isfinite(v))
        fail(errc::invalid_argument, "non-finite centroid value");
    if (qc <= 1) {
      if (!index[c].empty())
        fail(errc::invalid_argument,
             "channel with q <= 1 must not store an index column");
      continue;
    }
    if (index[c].size() != static_cast<std::size_t>(n_filters))
      fail(errc::invalid_argument, "index column must have N entries");
    std::vector<bool> used(static_cast<std::size_t>(qc), false);
    for (std::uint16_t id : index[c]) {
      if (id < 1 || id > qc)
        fail(errc::invalid_argument,
             "index entry " + std::to_string(id) + " out of [1, " +
                 std::to_string(qc) + "]");
      used[id - 1] = true;
    }
    if (std::find(used.begin(), used.end(), false) != used.end())
      fail(errc::invalid_argument,
           "dead centroid in channel " + std::to_string(c));
  }
}

WeightTensor CompressedLayer::expand() const {
  WeightTensor w = WeightTensor::zeros(n_filters, in_channels, kernel_h,
                                       kernel_w);
  for (int c = 0; c < in_channels; ++c) {
    if (q[c] == 0) continue;  // pruned channel stays zero
    for (int n = 0; n < n_filters; ++n) {
      std::span<const float> src = centroid(c, centroid_id(n, c));
      std::span<float> dst = w.kernel(n, c);
      std::copy(src.begin(), src.end(), dst.begin());
    }
  }
  return w;
}

int LayerSpec::out_channels() const {
  if (weights) return weights->n_filters();
  if (compressed) return compressed->n_filters;
  fail(errc::state, "layer has no weight payload");
}

int LayerSpec::in_channels() const {
  if (weights) return weights->in_channels();
  if (compressed) return compressed->in_channels;
  fail(errc::state, "layer has no weight payload");
}

int LayerSpec::kernel_h() const {
  if (weights) return weights->kernel_h();
  if (compressed) return compressed->kernel_h;
  fail(errc::state, "layer has no weight payload");
}

int LayerSpec::kernel_w() const {
  if (weights) return weights->kernel_w();
  if (compressed) return compressed->kernel_w;
  fail(errc::state, "layer has no weight payload");
}

void LayerSpec::validate(int own_index) const {
  std::string where = "layer " + std::to_string(own_index) +
                      (name.empty() ? "" : " (" + name + ")");
  if (weight_bearing()) {
    if (weights.has_value() == compressed.has_value())
      fail(errc::invalid_argument,
           where + ": weight-bearing layers carry exactly one payload");
    if (compressed) compressed->validate();
    if (kind == LayerKind::fully_connected) {
      if (kernel_h() != 1 || kernel_w() != 1)
        fail(errc::invalid_argument,
             where + ": fully-connected layers must use 1x1 kernels");
      if (!geometry.is_unit())
        fail(errc::invalid_argument,
             where + ": fully-connected layers must use unit geometry");
    }
    geometry.validate();
    if (!bias.empty() &&
        bias.size() != static_cast<std::size_t>(out_channels()))
      fail(errc::invalid_argument,
           where + ": bias length does not match filter count");
    for (float v : bias)
      if (!std::isfinite(v))
        fail(errc::invalid_argument, where + ": non-finite bias value");
  } else {
    if (weights || compressed)
      fail(errc::invalid_argument,
           where + ": only weight-bearing layers carry payloads");
    if (!bias.empty())
      fail(errc::invalid_argument, where + ": only conv layers carry biases");
    if (kind == LayerKind::pool_avg) {
      if (pool_h < 1 || pool_w < 1)
        fail(errc::invalid_argument, where + ": pooling window must be >= 1");
      geometry.validate();
    }
    if (kind == LayerKind::residual_add) {
      if (residual_source < -1 || residual_source >= own_index)
        fail(errc::invalid_argument,
             where + ": residual source must reference an earlier layer");
    }
  }
}

LayerSpec make_conv_layer(std::string name, WeightTensor w, ConvGeometry g,
                          std::vector<float> bias) {
  LayerSpec layer;
  layer.kind = LayerKind::conv;
  layer.name = std::move(name);
  layer.geometry = g;
  layer.weights = std::move(w);
  layer.bias = std::move(bias);
  return layer;
}

LayerSpec make_fc_layer(std::string name, int out_features, int in_features,
                        std::vector<float> weights, std::vector<float> bias) {
  LayerSpec layer;
  layer.kind = LayerKind::fully_connected;
  layer.name = std::move(name);
  layer.weights =
      WeightTensor(out_features, in_features, 1, 1, std::move(weights));
  layer.bias = std::move(bias);
  return layer;
}

LayerSpec make_relu_layer() {
  LayerSpec layer;
  layer.kind = LayerKind::relu;
  return layer;
}

LayerSpec make_pool_avg_layer(int window_h, int window_w, ConvGeometry g) {
  LayerSpec layer;
  layer.kind = LayerKind::pool_avg;
  layer.pool_h = window_h;
  layer.pool_w = window_w;
  layer.geometry = g;
  return layer;
}

LayerSpec make_flatten_layer() {
  LayerSpec layer;
  layer.kind = LayerKind::flatten;
  return layer;
}

LayerSpec make_residual_add_layer(int source_layer) {
  LayerSpec layer;
  layer.kind = LayerKind::residual_add;
  layer.residual_source = source_layer;
  return layer;
}

bool ModelGraph::has_compressed_payload() const {
  return std::any_of(layers.begin(), layers.end(), [](const LayerSpec& l) {
    return l.has_compressed_payload();
  });
}

void ModelGraph::apply_default_exemptions() {
  int first = -1, last = -1;
  for (int i = 0; i < static_cast<int>(layers.size()); ++i) {
    if (!layers[i].weight_bearing()) continue;
    if (first < 0) first = i;
    last = i;
  }
  if (first >= 0) layers[first].compress_exempt = true;
  if (last >= 0) layers[last].compress_exempt = true;
}

std::vector<Shape3> ModelGraph::propagate_shapes() const {
  if (input_shape.channels < 1 || input_shape.height < 1 ||
      input_shape.width < 1)
    fail(errc::shape, "model input shape must be positive");

  std::vector<Shape3> shapes;
  shapes.reserve(layers.size());
  Shape3 cur = input_shape;
  for (int i = 0; i < static_cast<int>(layers.size()); ++i) {
    const LayerSpec& layer = layers[i];
    layer.validate(i);
    std::string where = "layer " + std::to_string(i) +
                        (layer.name.empty() ? "" : " (" + layer.name + ")");
    switch (layer.kind) {
      case LayerKind::conv:
      case LayerKind::fully_connected: {
        if (cur.channels != layer.in_channels())
          fail(errc::shape, where + ": expects " +
                                std::to_string(layer.in_channels()) +
                                " input channels, got " + cur.str());
        cur = {layer.out_channels(),
               conv_output_extent(cur.height, layer.kernel_h(),
                                  layer.geometry.stride_h,
                                  layer.geometry.pad_h),
               conv_output_extent(cur.width, layer.kernel_w(),
                                  layer.geometry.stride_w,
                                  layer.geometry.pad_w)};
        break;
      }
      case LayerKind::relu:
        break;
      case LayerKind::flatten:
        cur = {static_cast<int>(cur.count()), 1, 1};
        break;
      case LayerKind::pool_avg:
        cur = {cur.channels,
               conv_output_extent(cur.height, layer.pool_h,
                                  layer.geometry.stride_h,
                                  layer.geometry.pad_h),
               conv_output_extent(cur.width, layer.pool_w,
                                  layer.geometry.stride_w,
                                  layer.geometry.pad_w)};
        break;
      case LayerKind::residual_add: {
        Shape3 source = layer.residual_source < 0
                            ? input_shape
                            : shapes[static_cast<std::size_t>(
                                  layer.residual_source)];
        if (!(source == cur))
          fail(errc::shape, where + ": residual source shape " + source.str() +
                                " does not match current shape " + cur.str());
        break;
      }
    }
    shapes.push_back(cur);
  }
  return shapes;
}

Shape3 ModelGraph::output_shape() const {
  std::vector<Shape3> shapes = propagate_shapes();
  return shapes.empty() ? input_shape : shapes.back();
}

int ModelGraph::last_conv_layer() const {
  for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i)
    if (layers[i].kind == LayerKind::conv) return i;
  return -1;
}

void ModelGraph::validate() const { propagate_shapes(); }

}  // namespace kse
