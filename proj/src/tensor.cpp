//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
#include "kse/tensor.hpp"

#include <cmath>
#include <string>

namespace kse {

namespace {

void require_finite(const std::vector<float>& data, const char* what) {
  for (float v : data) {
    if (!std::isfinite(v))
      fail(errc::invalid_argument,
           std::string(what) + " contains a non-finite value");
  }
}

}  // namespace

void ConvGeometry::validate() const {
  if (stride_h < 1 || stride_w < 1)
    fail(errc::config, "stride must be >= 1, got " +
                           std::to_string(stride_h) + "x" +
                           std::to_string(stride_w));
  if (pad_h < 0 || pad_w < 0)
    fail(errc::config, "padding must be >= 0, got " + std::to_string(pad_h) +
                           "x" + std::to_string(pad_w));
}

int conv_output_extent(int extent, int kernel, int stride, int pad) {
  long numer = static_cast<long>(extent) + 2L * pad - kernel;
  if (numer < 0)
    fail(errc::shape, "kernel " + std::to_string(kernel) +
                          " does not fit padded input extent " +
                          std::to_string(extent) + "+2*" + std::to_string(pad));
  int out = static_cast<int>(numer / stride) + 1;
  if (out <= 0)
    fail(errc::shape, "geometry yields non-positive output extent");
  return out;
}

WeightTensor::WeightTensor(int n_filters, int in_channels, int kernel_h,
                           int kernel_w, std::vector<float> data)
    : n_(n_filters), c_(in_channels), kh_(kernel_h), kw_(kernel_w),
      data_(std::move(data)) {
  if (n_ < 1 || c_ < 1 || kh_ < 1 || kw_ < 1)
    fail(errc::invalid_argument, "weight tensor dims must all be >= 1");
  std::size_t expected = static_cast<std::size_t>(n_) * c_ * kh_ * kw_;
  if (data_.size() != expected)
    fail(errc::invalid_argument,
         "weight data length " + std::to_string(data_.size()) +
             " does not match dims (expected " + std::to_string(expected) +
             ")");
  require_finite(data_, "weight tensor");
}

WeightTensor WeightTensor::zeros(int n_filters, int in_channels, int kernel_h,
                                 int kernel_w) {
  if (n_filters < 1 || in_channels < 1 || kernel_h < 1 || kernel_w < 1)
    fail(errc::invalid_argument, "weight tensor dims must all be >= 1");
  std::vector<float> data(static_cast<std::size_t>(n_filters) * in_channels *
                              kernel_h * kernel_w,
                          0.0f);
  return WeightTensor(n_filters, in_channels, kernel_h, kernel_w,
                      std::move(data));
}

void WeightTensor::check_index(int n, int c) const {
  if (n < 0 || n >= n_ || c < 0 || c >= c_)
    fail(errc::invalid_argument,
         "kernel index (" + std::to_string(n) + ", " + std::to_string(c) +
             ") out of range for " + std::to_string(n_) + "x" +
             std::to_string(c_) + " tensor");
}

std::span<const float> WeightTensor::kernel(int n, int c) const {
  check_index(n, c);
  return {data_.data() + offset(n, c, 0, 0),
          static_cast<std::size_t>(kernel_size())};
}

std::span<float> WeightTensor::kernel(int n, int c) {
  check_index(n, c);
  return {data_.data() + offset(n, c, 0, 0),
          static_cast<std::size_t>(kernel_size())};
}

FeatureStack::FeatureStack(int channels, int height, int width)
    : c_(channels), h_(height), w_(width),
      data_(static_cast<std::size_t>(channels) * height * width, 0.0f) {
  if (c_ < 1 || h_ < 1 || w_ < 1)
    fail(errc::invalid_argument, "feature stack dims must all be >= 1");
}

FeatureStack::FeatureStack(int channels, int height, int width,
                           std::vector<float> data)
    : c_(channels), h_(height), w_(width), data_(std::move(data)) {
  if (c_ < 1 || h_ < 1 || w_ < 1)
    fail(errc::invalid_argument, "feature stack dims must all be >= 1");
  std::size_t expected = static_cast<std::size_t>(c_) * h_ * w_;
  if (data_.size() != expected)
    fail(errc::invalid_argument,
         "feature data length " + std::to_string(data_.size()) +
             " does not match dims (expected " + std::to_string(expected) +
             ")");
  require_finite(data_, "feature stack");
}

std::span<const float> FeatureStack::channel(int c) const {
  if (c < 0 || c >= c_)
    fail(errc::invalid_argument,
         "channel " + std::to_string(c) + " out of range");
  return {data_.data() + offset(c, 0, 0), plane_size()};
}

std::span<float> FeatureStack::channel(int c) {
  if (c < 0 || c >= c_)
    fail(errc::invalid_argument,
         "channel " + std::to_string(c) + " out of range");
  return {data_.data() + offset(c, 0, 0), plane_size()};
}

Plane2D conv2d_single(std::span<const float> x, int h, int w,
                      std::span<const float> k, int kh, int kw,
                      const ConvGeometry& g) {
  g.validate();
  if (h < 1 || w < 1 || kh < 1 || kw < 1)
    fail(errc::invalid_argument, "conv2d_single dims must be >= 1");
  if (x.size() != static_cast<std::size_t>(h) * w ||
      k.size() != static_cast<std::size_t>(kh) * kw)
    fail(errc::invalid_argument, "conv2d_single span sizes do not match dims");

  int out_h = conv_output_extent(h, kh, g.stride_h, g.pad_h);
  int out_w = conv_output_extent(w, kw, g.stride_w, g.pad_w);
  Plane2D out(out_h, out_w);

  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      double acc = 0.0;
      int base_y = oy * g.stride_h - g.pad_h;
      int base_x = ox * g.stride_w - g.pad_w;
      for (int ky = 0; ky < kh; ++ky) {
        int iy = base_y + ky;
        if (iy < 0 || iy >= h) continue;  // zero padding
        for (int kx = 0; kx < kw; ++kx) {
          int ix = base_x + kx;
          if (ix < 0 || ix >= w) continue;
          acc += static_cast<double>(x[static_cast<std::size_t>(iy) * w + ix]) *
                 static_cast<double>(k[static_cast<std::size_t>(ky) * kw + kx]);
        }
      }
      out.at(oy, ox) = static_cast<float>(acc);
    }
  }
  return out;
}

Plane2D conv2d_single(const FeatureStack& x, int channel,
                      std::span<const float> k, int kh, int kw,
                      const ConvGeometry& g) {
  return conv2d_single(x.channel(channel), x.height(), x.width(), k, kh, kw, g);
}

FeatureStack conv2d_dense(const FeatureStack& x, const WeightTensor& w,
                          const ConvGeometry& g, std::span<const float> bias) {
  g.validate();
  if (x.channels() != w.in_channels())
    fail(errc::shape, "input has " + std::to_string(x.channels()) +
                          " channels but weights expect " +
                          std::to_string(w.in_channels()));
  if (!bias.empty() && bias.size() != static_cast<std::size_t>(w.n_filters()))
    fail(errc::shape, "bias length does not match filter count");

  int out_h = conv_output_extent(x.height(), w.kernel_h(), g.stride_h, g.pad_h);
  int out_w = conv_output_extent(x.width(), w.kernel_w(), g.stride_w, g.pad_w);
  FeatureStack out(w.n_filters(), out_h, out_w);

  int h = x.height(), width = x.width();
  int kh = w.kernel_h(), kw = w.kernel_w();
  for (int n = 0; n < w.n_filters(); ++n) {
    double b = bias.empty() ? 0.0 : static_cast<double>(bias[n]);
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        double acc = b;
        int base_y = oy * g.stride_h - g.pad_h;
        int base_x = ox * g.stride_w - g.pad_w;
        for (int c = 0; c < x.channels(); ++c) {
          std::span<const float> plane = x.channel(c);
          std::span<const float> kern = w.kernel(n, c);
          for (int ky = 0; ky < kh; ++ky) {
            int iy = base_y + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              int ix = base_x + kx;
              if (ix < 0 || ix >= width) continue;
              acc += static_cast<double>(
                         plane[static_cast<std::size_t>(iy) * width + ix]) *
                     static_cast<double>(
                         kern[static_cast<std::size_t>(ky) * kw + kx]);
            }
          }
        }
        out.at(n, oy, ox) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

std::vector<float> flatten_kernel(const WeightTensor& w, int n, int c) {
  std::span<const float> k = w.kernel(n, c);
  return {k.begin(), k.end()};
}

Plane2D bilinear_upscale(const Plane2D& m, int out_h, int out_w) {
  if (m.height < 1 || m.width < 1)
    fail(errc::invalid_argument, "bilinear_upscale input dims must be >= 1");
  if (out_h < 1 || out_w < 1)
    fail(errc::invalid_argument, "bilinear_upscale target dims must be >= 1");
  if (m.v.size() != static_cast<std::size_t>(m.height) * m.width)
    fail(errc::invalid_argument, "bilinear_upscale input size mismatch");

  Plane2D out(out_h, out_w);
  // Align-corners: source coordinate for output index i is
  // i * (in - 1) / (out - 1), collapsing to 0 when out == 1.
  double scale_y =
      out_h > 1 ? static_cast<double>(m.height - 1) / (out_h - 1) : 0.0;
  double scale_x =
      out_w > 1 ? static_cast<double>(m.width - 1) / (out_w - 1) : 0.0;

  for (int oy = 0; oy < out_h; ++oy) {
    double sy = oy * scale_y;
    int y0 = static_cast<int>(sy);
    if (y0 > m.height - 1) y0 = m.height - 1;
    int y1 = y0 + 1 < m.height ? y0 + 1 : y0;
    double fy = sy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      double sx = ox * scale_x;
      int x0 = static_cast<int>(sx);
      if (x0 > m.width - 1) x0 = m.width - 1;
      int x1 = x0 + 1 < m.width ? x0 + 1 : x0;
      double fx = sx - x0;
      double v00 = m.at(y0, x0), v01 = m.at(y0, x1);
      double v10 = m.at(y1, x0), v11 = m.at(y1, x1);
      double top = v00 + (v01 - v00) * fx;
      double bottom = v10 + (v11 - v10) * fx;
      out.at(oy, ox) = static_cast<float>(top + (bottom - top) * fy);
    }
  }
  return out;
}

}  // namespace kse
