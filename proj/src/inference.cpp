//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
#include "kse/inference.hpp"

#include <algorithm>
#include <iostream>

#include "kse/parallel.hpp"

namespace kse {
namespace {

std::string layer_label(const ModelGraph& m, int i) {
  const LayerSpec& layer = m.layers[static_cast<std::size_t>(i)];
  return "layer " + std::to_string(i) +
         (layer.name.empty() ? "" : " (" + layer.name + ")");
}

// One dense output channel; same accumulation order as conv2d_dense.
void dense_filter(const FeatureStack& x, const WeightTensor& w, int n,
                  const ConvGeometry& g, double bias, FeatureStack& out) {
  int h = x.height(), width = x.width();
  int kh = w.kernel_h(), kw = w.kernel_w();
  for (int oy = 0; oy < out.height(); ++oy) {
    for (int ox = 0; ox < out.width(); ++ox) {
      double acc = bias;
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

FeatureStack eval_dense_conv(const FeatureStack& x, const LayerSpec& layer,
                             int workers) {
  const WeightTensor& w = *layer.weights;
  if (x.channels() != w.in_channels())
    fail(errc::shape, "expects " + std::to_string(w.in_channels()) +
                          " input channels, got " +
                          std::to_string(x.channels()));
  const ConvGeometry& g = layer.geometry;
  int oh = conv_output_extent(x.height(), w.kernel_h(), g.stride_h, g.pad_h);
  int ow = conv_output_extent(x.width(), w.kernel_w(), g.stride_w, g.pad_w);
  FeatureStack out(w.n_filters(), oh, ow);
  parallel_for(static_cast<std::size_t>(w.n_filters()), workers,
               [&](std::size_t n) {
                 double b = layer.bias.empty()
                                ? 0.0
                                : static_cast<double>(layer.bias[n]);
                 dense_filter(x, w, static_cast<int>(n), g, b, out);
               });
  return out;
}

// Stage 1 of the compressed path: the shared activation map of one centroid,
// accumulated and kept in double.
void shared_map(std::span<const float> plane, int h, int w,
                std::span<const float> kern, int kh, int kw,
                const ConvGeometry& g, int oh, int ow, double* out) {
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double acc = 0.0;
      int base_y = oy * g.stride_h - g.pad_h;
      int base_x = ox * g.stride_w - g.pad_w;
      for (int ky = 0; ky < kh; ++ky) {
        int iy = base_y + ky;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < kw; ++kx) {
          int ix = base_x + kx;
          if (ix < 0 || ix >= w) continue;
          acc += static_cast<double>(
                     plane[static_cast<std::size_t>(iy) * w + ix]) *
                 static_cast<double>(
                     kern[static_cast<std::size_t>(ky) * kw + kx]);
        }
      }
      out[static_cast<std::size_t>(oy) * ow + ox] = acc;
    }
  }
}

FeatureStack eval_compressed_conv(const FeatureStack& x, const LayerSpec& layer,
                                  int workers, const std::string& where) {
  const CompressedLayer& cl = *layer.compressed;
  if (x.channels() != cl.in_channels)
    fail(errc::shape, "expects " + std::to_string(cl.in_channels) +
                          " input channels, got " +
                          std::to_string(x.channels()));
  const ConvGeometry& g = layer.geometry;
  int oh = conv_output_extent(x.height(), cl.kernel_h, g.stride_h, g.pad_h);
  int ow = conv_output_extent(x.width(), cl.kernel_w, g.stride_w, g.pad_w);
  std::size_t plane = static_cast<std::size_t>(oh) * ow;

  if (cl.total_kernels() == 0)
    std::cerr << "warning: " << where
              << ": every input channel is pruned; output is bias only\n";

  // Stage 1: q_c shared activation maps per channel.
  std::vector<std::vector<double>> maps(
      static_cast<std::size_t>(cl.in_channels));
  std::vector<std::pair<int, int>> tasks;  // (channel, centroid id - 1)
  for (int c = 0; c < cl.in_channels; ++c) {
    maps[static_cast<std::size_t>(c)].resize(cl.q[c] * plane);
    for (int i = 0; i < cl.q[c]; ++i) tasks.emplace_back(c, i);
  }
  parallel_for(tasks.size(), workers, [&](std::size_t t) {
    auto [c, i] = tasks[t];
    shared_map(x.channel(c), x.height(), x.width(), cl.centroid(c, i + 1),
               cl.kernel_h, cl.kernel_w, g, oh, ow,
               maps[static_cast<std::size_t>(c)].data() +
                   static_cast<std::size_t>(i) * plane);
  });

  // Stage 2: channel fusion, one float32 rounding per output value.
  FeatureStack out(cl.n_filters, oh, ow);
  parallel_for(static_cast<std::size_t>(cl.n_filters), workers,
               [&](std::size_t n) {
                 std::vector<double> acc(plane,
                                         layer.bias.empty()
                                             ? 0.0
                                             : static_cast<double>(
                                                   layer.bias[n]));
                 for (int c = 0; c < cl.in_channels; ++c) {
                   if (cl.q[c] == 0) continue;  // pruned channel
                   int id = cl.centroid_id(static_cast<int>(n), c);
                   const double* z = maps[static_cast<std::size_t>(c)].data() +
                                     static_cast<std::size_t>(id - 1) * plane;
                   for (std::size_t p = 0; p < plane; ++p) acc[p] += z[p];
                 }
                 std::span<float> dst = out.channel(static_cast<int>(n));
                 for (std::size_t p = 0; p < plane; ++p)
                   dst[p] = static_cast<float>(acc[p]);
               });
  return out;
}

FeatureStack eval_relu(const FeatureStack& x) {
  FeatureStack out = x;
  for (float& v : out.data()) v = v > 0.0f ? v : 0.0f;
  return out;
}

FeatureStack eval_pool_avg(const FeatureStack& x, const LayerSpec& layer) {
  const ConvGeometry& g = layer.geometry;
  int oh = conv_output_extent(x.height(), layer.pool_h, g.stride_h, g.pad_h);
  int ow = conv_output_extent(x.width(), layer.pool_w, g.stride_w, g.pad_w);
  FeatureStack out(x.channels(), oh, ow);
  double window = static_cast<double>(layer.pool_h) * layer.pool_w;
  for (int c = 0; c < x.channels(); ++c) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (int ky = 0; ky < layer.pool_h; ++ky) {
          int iy = oy * g.stride_h - g.pad_h + ky;
          if (iy < 0 || iy >= x.height()) continue;
          for (int kx = 0; kx < layer.pool_w; ++kx) {
            int ix = ox * g.stride_w - g.pad_w + kx;
            if (ix < 0 || ix >= x.width()) continue;
            acc += static_cast<double>(x.at(c, iy, ix));
          }
        }
        // Padded positions count toward the divisor (fixed-window average).
        out.at(c, oy, ox) = static_cast<float>(acc / window);
      }
    }
  }
  return out;
}

FeatureStack eval_flatten(const FeatureStack& x) {
  return FeatureStack(static_cast<int>(x.size()), 1, 1, x.data());
}

FeatureStack eval_residual_add(const FeatureStack& cur,
                               const FeatureStack& src) {
  if (cur.channels() != src.channels() || cur.height() != src.height() ||
      cur.width() != src.width())
    fail(errc::shape, "residual shapes do not match");
  FeatureStack out = cur;
  const std::vector<float>& other = src.data();
  for (std::size_t i = 0; i < out.data().size(); ++i)
    out.data()[i] += other[i];
  return out;
}

FeatureStack run(const ModelGraph& m, const FeatureStack& x, int workers,
                 const LayerObserver& observer) {
  if (x.channels() != m.input_shape.channels ||
      x.height() != m.input_shape.height || x.width() != m.input_shape.width)
    fail(errc::shape,
         "input is " + std::to_string(x.channels()) + "x" +
             std::to_string(x.height()) + "x" + std::to_string(x.width()) +
             " but the model expects " + m.input_shape.str());

  std::vector<FeatureStack> outputs;
  outputs.reserve(m.layers.size());
  for (int i = 0; i < static_cast<int>(m.layers.size()); ++i) {
    const LayerSpec& layer = m.layers[static_cast<std::size_t>(i)];
    layer.validate(i);
    const FeatureStack& cur = outputs.empty() ? x : outputs.back();
    std::string where = layer_label(m, i);
    FeatureStack y;
    try {
      switch (layer.kind) {
        case LayerKind::conv:
        case LayerKind::fully_connected:
          y = layer.weights ? eval_dense_conv(cur, layer, workers)
                            : eval_compressed_conv(cur, layer, workers, where);
          break;
        case LayerKind::relu:
          y = eval_relu(cur);
          break;
        case LayerKind::pool_avg:
          y = eval_pool_avg(cur, layer);
          break;
        case LayerKind::flatten:
          y = eval_flatten(cur);
          break;
        case LayerKind::residual_add: {
          const FeatureStack& src =
              layer.residual_source < 0
                  ? x
                  : outputs[static_cast<std::size_t>(layer.residual_source)];
          y = eval_residual_add(cur, src);
          break;
        }
      }
    } catch (const error& e) {
      fail(e.code(), where + ": " + e.what());
    }
    if (observer) observer(i, cur, y);
    outputs.push_back(std::move(y));
  }
  return outputs.empty() ? x : std::move(outputs.back());
}

}  // namespace

FeatureStack forward_dense(const ModelGraph& m, const FeatureStack& x,
                           int workers, const LayerObserver& observer) {
  if (m.has_compressed_payload())
    fail(errc::state, "forward_dense needs a fully dense model");
  return run(m, x, workers, observer);
}

FeatureStack forward_compressed(const ModelGraph& m, const FeatureStack& x,
                                int workers, const LayerObserver& observer) {
  return run(m, x, workers, observer);
}

FeatureStack forward(const ModelGraph& m, const FeatureStack& x, int workers,
                     const LayerObserver& observer) {
  return run(m, x, workers, observer);
}

FlopCount count_flops(const ModelGraph& m, const Shape3& input_shape) {
  ModelGraph probe = m;
  probe.input_shape = input_shape;
  std::vector<Shape3> shapes = probe.propagate_shapes();

  FlopCount fc;
  fc.layers.resize(m.layers.size());
  Shape3 cur = input_shape;
  for (int i = 0; i < static_cast<int>(m.layers.size()); ++i) {
    const LayerSpec& layer = m.layers[static_cast<std::size_t>(i)];
    const Shape3& out = shapes[static_cast<std::size_t>(i)];
    FlopCount::Layer& entry = fc.layers[static_cast<std::size_t>(i)];
    if (layer.weight_bearing()) {
      std::uint64_t spatial =
          static_cast<std::uint64_t>(out.height) * out.width;
      std::uint64_t ks = static_cast<std::uint64_t>(layer.kernel_h()) *
                         layer.kernel_w();
      if (layer.weights) {
        entry.multiply_adds = static_cast<std::uint64_t>(layer.out_channels()) *
                              layer.in_channels() * spatial * ks;
        entry.strict_ops = entry.multiply_adds;
      } else {
        const CompressedLayer& cl = *layer.compressed;
        entry.multiply_adds = cl.total_kernels() * spatial * ks;
        std::uint64_t live = 0;
        for (std::uint16_t qc : cl.q)
          if (qc > 0) ++live;
        std::uint64_t fusion_adds =
            live > 0 ? static_cast<std::uint64_t>(cl.n_filters) * spatial *
                           (live - 1)
                     : 0;
        entry.strict_ops = entry.multiply_adds + fusion_adds;
      }
    }
    fc.total_multiply_adds += entry.multiply_adds;
    fc.total_strict_ops += entry.strict_ops;
    cur = out;
  }
  return fc;
}

}  // namespace kse
