//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Dense tensor containers and the 2D convolution / interpolation primitives
// the rest of the toolkit builds on. Convolution follows the deep-learning
// convention (cross-correlation, zero padding, no kernel flip); accumulation
// is done in double and results are stored as float32.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kse/error.hpp"

namespace kse {

// Stride and zero-padding of a convolution-style op.
struct ConvGeometry {
  int stride_h = 1;
  int stride_w = 1;
  int pad_h = 0;
  int pad_w = 0;

  void validate() const;
  bool is_unit() const {
    return stride_h == 1 && stride_w == 1 && pad_h == 0 && pad_w == 0;
  }
  bool operator==(const ConvGeometry&) const = default;
};

// floor((extent + 2*pad - kernel) / stride) + 1. Throws errc::shape when the
// result would be non-positive (kernel does not fit the padded input).
int conv_output_extent(int extent, int kernel, int stride, int pad);

// 4D convolution weights W, N x C x Kh x Kw, row-major float32.
class WeightTensor {
 public:
  WeightTensor() = default;
  WeightTensor(int n_filters, int in_channels, int kernel_h, int kernel_w,
               std::vector<float> data);
  static WeightTensor zeros(int n_filters, int in_channels, int kernel_h,
                            int kernel_w);

  int n_filters() const { return n_; }
  int in_channels() const { return c_; }
  int kernel_h() const { return kh_; }
  int kernel_w() const { return kw_; }
  int kernel_size() const { return kh_ * kw_; }
  std::size_t size() const { return data_.size(); }

  float at(int n, int c, int y, int x) const {
    return data_[offset(n, c, y, x)];
  }
  float& at(int n, int c, int y, int x) { return data_[offset(n, c, y, x)]; }

  // The contiguous Kh*Kw slice connecting input channel c to filter n.
  std::span<const float> kernel(int n, int c) const;
  std::span<float> kernel(int n, int c);

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

 private:
  std::size_t offset(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * c_ + c) * kh_ + y) * kw_ + x;
  }
  void check_index(int n, int c) const;

  int n_ = 0, c_ = 0, kh_ = 0, kw_ = 0;
  std::vector<float> data_;
};

// A stack of 2D maps (channels x height x width), row-major float32. Holds
// model inputs, layer outputs and per-channel activation maps.
class FeatureStack {
 public:
  FeatureStack() = default;
  FeatureStack(int channels, int height, int width);  // zero-filled
  FeatureStack(int channels, int height, int width, std::vector<float> data);

  int channels() const { return c_; }
  int height() const { return h_; }
  int width() const { return w_; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane_size() const {
    return static_cast<std::size_t>(h_) * w_;
  }

  float at(int c, int y, int x) const { return data_[offset(c, y, x)]; }
  float& at(int c, int y, int x) { return data_[offset(c, y, x)]; }

  std::span<const float> channel(int c) const;
  std::span<float> channel(int c);

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

 private:
  std::size_t offset(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * h_ + y) * w_ + x;
  }

  int c_ = 0, h_ = 0, w_ = 0;
  std::vector<float> data_;
};

// A single 2D map (heat maps, activation maps, upscaled feature maps).
struct Plane2D {
  int height = 0;
  int width = 0;
  std::vector<float> v;

  Plane2D() = default;
  Plane2D(int h, int w) : height(h), width(w), v(std::size_t(h) * w, 0.0f) {}

  float at(int y, int x) const { return v[std::size_t(y) * width + x]; }
  float& at(int y, int x) { return v[std::size_t(y) * width + x]; }
  std::size_t size() const { return v.size(); }
};

// 2D cross-correlation of a single input plane with a single kernel under
// geometry g. Output extent follows conv_output_extent.
Plane2D conv2d_single(std::span<const float> x, int h, int w,
                      std::span<const float> k, int kh, int kw,
                      const ConvGeometry& g);
Plane2D conv2d_single(const FeatureStack& x, int channel,
                      std::span<const float> k, int kh, int kw,
                      const ConvGeometry& g);

// Dense multi-channel convolution: output channel n sums the per-channel
// cross-correlations with W[n,c]. Optional bias is one value per filter.
FeatureStack conv2d_dense(const FeatureStack& x, const WeightTensor& w,
                          const ConvGeometry& g,
                          std::span<const float> bias = {});

// Row-major flattening of the (n, c) kernel into a length Kh*Kw vector.
std::vector<float> flatten_kernel(const WeightTensor& w, int n, int c);

// Bilinear interpolation with align-corners semantics to an out_h x out_w
// grid. Upscaling to the same size is the identity.
Plane2D bilinear_upscale(const Plane2D& m, int out_h, int out_w);

}  // namespace kse
