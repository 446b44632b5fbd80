//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
#include "kse/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "kse/inference.hpp"
#include "kse/parallel.hpp"

namespace kse {
namespace {

void check_grad_shape(const FeatureStack& x, const FeatureStackD& grad_out,
                      int out_channels, int oh, int ow) {
  (void)x;
  if (grad_out.channels != out_channels || grad_out.height != oh ||
      grad_out.width != ow)
    fail(errc::shape, "output gradient does not match the layer output shape");
}

// Softmax cross-entropy on the flattened final stack. Returns the loss and
// fills dlogits (same element order as the logits) when non-null.
double softmax_cross_entropy(const FeatureStack& logits, int label,
                             std::vector<double>* dlogits) {
  const std::vector<float>& z = logits.data();
  if (z.empty()) fail(errc::shape, "model produced an empty output");
  if (label < 0 || label >= static_cast<int>(z.size()))
    fail(errc::invalid_argument,
         "label " + std::to_string(label) + " out of range for " +
             std::to_string(z.size()) + " model outputs");
  double zmax = z[0];
  for (float v : z) zmax = std::max(zmax, static_cast<double>(v));
  double total = 0.0;
  std::vector<double> e(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    e[i] = std::exp(static_cast<double>(z[i]) - zmax);
    total += e[i];
  }
  double loss = std::log(total) -
                (static_cast<double>(z[static_cast<std::size_t>(label)]) - zmax);
  if (dlogits) {
    dlogits->resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
      (*dlogits)[i] = e[i] / total;
      if (static_cast<int>(i) == label) (*dlogits)[i] -= 1.0;
    }
  }
  return loss;
}

void add_into(std::vector<double>& dst, const std::vector<double>& src) {
  if (dst.size() != src.size())
    fail(errc::internal, "gradient accumulator size mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Deterministic Fisher-Yates shuffle (std::shuffle draws are
// implementation-defined, this is not).
void shuffle_indices(std::vector<std::size_t>& order, std::mt19937_64& rng) {
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    std::size_t j = i + static_cast<std::size_t>(
                            rng() % static_cast<std::uint64_t>(order.size() - i));
    std::swap(order[i], order[j]);
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0))
    fail(errc::config, "learning_rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0))
    fail(errc::config, "momentum must lie in [0, 1)");
  if (epochs < 1) fail(errc::config, "epochs must be >= 1");
  if (batch_size < 1) fail(errc::config, "batch_size must be >= 1");
  if (!(weight_decay >= 0.0)) fail(errc::config, "weight_decay must be >= 0");
  if (workers < 0) fail(errc::config, "workers must be >= 0");
}

CompressedBackward backward_compressed_layer(const FeatureStack& x,
                                             const CompressedLayer& layer,
                                             const ConvGeometry& g,
                                             const FeatureStackD& grad_out) {
  layer.validate();
  g.validate();
  if (x.channels() != layer.in_channels)
    fail(errc::shape, "input channels do not match the compressed layer");
  int oh = conv_output_extent(x.height(), layer.kernel_h, g.stride_h, g.pad_h);
  int ow = conv_output_extent(x.width(), layer.kernel_w, g.stride_w, g.pad_w);
  check_grad_shape(x, grad_out, layer.n_filters, oh, ow);

  CompressedBackward back;
  back.input_grad = FeatureStackD(x.channels(), x.height(), x.width());
  back.centroid_grads.resize(static_cast<std::size_t>(layer.in_channels));
  std::size_t ks = static_cast<std::size_t>(layer.kernel_size());
  for (int c = 0; c < layer.in_channels; ++c)
    back.centroid_grads[static_cast<std::size_t>(c)].assign(layer.q[c] * ks,
                                                            0.0);

  int kh = layer.kernel_h, kw = layer.kernel_w;
  for (int n = 0; n < layer.n_filters; ++n) {
    for (int c = 0; c < layer.in_channels; ++c) {
      if (layer.q[c] == 0) continue;  // pruned channel: no kernel, no grads
      int id = layer.centroid_id(n, c);
      std::span<const float> kern = layer.centroid(c, id);
      double* cg = back.centroid_grads[static_cast<std::size_t>(c)].data() +
                   static_cast<std::size_t>(id - 1) * ks;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double gval = grad_out.at(n, oy, ox);
          if (gval == 0.0) continue;
          int base_y = oy * g.stride_h - g.pad_h;
          int base_x = ox * g.stride_w - g.pad_w;
          for (int ky = 0; ky < kh; ++ky) {
            int iy = base_y + ky;
            if (iy < 0 || iy >= x.height()) continue;
            for (int kx = 0; kx < kw; ++kx) {
              int ix = base_x + kx;
              if (ix < 0 || ix >= x.width()) continue;
              std::size_t kidx = static_cast<std::size_t>(ky) * kw + kx;
              cg[kidx] += static_cast<double>(x.at(c, iy, ix)) * gval;
              back.input_grad.at(c, iy, ix) +=
                  static_cast<double>(kern[kidx]) * gval;
            }
          }
        }
      }
    }
  }
  return back;
}

DenseBackward backward_dense_layer(const FeatureStack& x,
                                   const WeightTensor& w,
                                   const ConvGeometry& g, bool has_bias,
                                   const FeatureStackD& grad_out) {
  g.validate();
  if (x.channels() != w.in_channels())
    fail(errc::shape, "input channels do not match the dense layer");
  int oh = conv_output_extent(x.height(), w.kernel_h(), g.stride_h, g.pad_h);
  int ow = conv_output_extent(x.width(), w.kernel_w(), g.stride_w, g.pad_w);
  check_grad_shape(x, grad_out, w.n_filters(), oh, ow);

  DenseBackward back;
  back.input_grad = FeatureStackD(x.channels(), x.height(), x.width());
  back.weight_grads.assign(w.size(), 0.0);
  if (has_bias) back.bias_grads.assign(static_cast<std::size_t>(w.n_filters()), 0.0);

  int kh = w.kernel_h(), kw = w.kernel_w();
  std::size_t ks = static_cast<std::size_t>(w.kernel_size());
  for (int n = 0; n < w.n_filters(); ++n) {
    double bias_acc = 0.0;
    for (int c = 0; c < w.in_channels(); ++c) {
      std::span<const float> kern = w.kernel(n, c);
      double* wg = back.weight_grads.data() +
                   (static_cast<std::size_t>(n) * w.in_channels() + c) * ks;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double gval = grad_out.at(n, oy, ox);
          if (c == 0) bias_acc += gval;
          if (gval == 0.0) continue;
          int base_y = oy * g.stride_h - g.pad_h;
          int base_x = ox * g.stride_w - g.pad_w;
          for (int ky = 0; ky < kh; ++ky) {
            int iy = base_y + ky;
            if (iy < 0 || iy >= x.height()) continue;
            for (int kx = 0; kx < kw; ++kx) {
              int ix = base_x + kx;
              if (ix < 0 || ix >= x.width()) continue;
              std::size_t kidx = static_cast<std::size_t>(ky) * kw + kx;
              wg[kidx] += static_cast<double>(x.at(c, iy, ix)) * gval;
              back.input_grad.at(c, iy, ix) +=
                  static_cast<double>(kern[kidx]) * gval;
            }
          }
        }
      }
    }
    if (has_bias) back.bias_grads[static_cast<std::size_t>(n)] = bias_acc;
  }
  return back;
}

void ModelGrads::init_for(const ModelGraph& m, bool update_exempt) {
  std::size_t count = m.layers.size();
  centroid_grads.assign(count, {});
  weight_grads.assign(count, {});
  bias_grads.assign(count, {});
  for (std::size_t i = 0; i < count; ++i) {
    const LayerSpec& layer = m.layers[i];
    if (!layer.weight_bearing()) continue;
    if (layer.compressed) {
      const CompressedLayer& cl = *layer.compressed;
      std::size_t ks = static_cast<std::size_t>(cl.kernel_size());
      centroid_grads[i].resize(static_cast<std::size_t>(cl.in_channels));
      for (int c = 0; c < cl.in_channels; ++c)
        centroid_grads[i][static_cast<std::size_t>(c)].assign(cl.q[c] * ks,
                                                              0.0);
    } else if (update_exempt) {
      weight_grads[i].assign(layer.weights->size(), 0.0);
      if (!layer.bias.empty()) bias_grads[i].assign(layer.bias.size(), 0.0);
    }
  }
}

void ModelGrads::accumulate(const ModelGrads& other) {
  if (centroid_grads.size() != other.centroid_grads.size())
    fail(errc::internal, "gradient accumulator layer count mismatch");
  for (std::size_t i = 0; i < centroid_grads.size(); ++i) {
    for (std::size_t c = 0; c < centroid_grads[i].size(); ++c)
      add_into(centroid_grads[i][c], other.centroid_grads[i][c]);
    if (!weight_grads[i].empty()) add_into(weight_grads[i], other.weight_grads[i]);
    if (!bias_grads[i].empty()) add_into(bias_grads[i], other.bias_grads[i]);
  }
}

void ModelGrads::scale(double factor) {
  for (auto& layer : centroid_grads)
    for (auto& channel : layer)
      for (double& v : channel) v *= factor;
  for (auto& layer : weight_grads)
    for (double& v : layer) v *= factor;
  for (auto& layer : bias_grads)
    for (double& v : layer) v *= factor;
}

double loss_and_gradients(const ModelGraph& m, const FeatureStack& x,
                          int label, bool update_exempt, ModelGrads& grads) {
  if (grads.centroid_grads.size() != m.layers.size())
    grads.init_for(m, update_exempt);

  // Forward with full activation capture.
  std::vector<FeatureStack> outs;
  outs.reserve(m.layers.size());
  FeatureStack final = forward(
      m, x, 1, [&](int, const FeatureStack&, const FeatureStack& out) {
        outs.push_back(out);
      });

  std::vector<double> dlogits;
  double loss = softmax_cross_entropy(final, label, &dlogits);
  if (m.layers.empty()) return loss;  // nothing to backpropagate into

  // Per-layer output-gradient accumulators.
  std::vector<FeatureStackD> gout(m.layers.size());
  for (std::size_t i = 0; i < m.layers.size(); ++i)
    gout[i] = FeatureStackD(outs[i].channels(), outs[i].height(),
                            outs[i].width());
  gout.back().v = dlogits;  // same element order as the flattened logits

  for (int i = static_cast<int>(m.layers.size()) - 1; i >= 0; --i) {
    const LayerSpec& layer = m.layers[static_cast<std::size_t>(i)];
    const FeatureStack& in = i == 0 ? x : outs[static_cast<std::size_t>(i - 1)];
    const FeatureStackD& gy = gout[static_cast<std::size_t>(i)];
    FeatureStackD gin;
    switch (layer.kind) {
      case LayerKind::conv:
      case LayerKind::fully_connected: {
        if (layer.compressed) {
          CompressedBackward back = backward_compressed_layer(
              in, *layer.compressed, layer.geometry, gy);
          auto& slot = grads.centroid_grads[static_cast<std::size_t>(i)];
          for (std::size_t c = 0; c < slot.size(); ++c)
            add_into(slot[c], back.centroid_grads[c]);
          gin = std::move(back.input_grad);
        } else {
          DenseBackward back = backward_dense_layer(
              in, *layer.weights, layer.geometry, !layer.bias.empty(), gy);
          if (!grads.weight_grads[static_cast<std::size_t>(i)].empty())
            add_into(grads.weight_grads[static_cast<std::size_t>(i)],
                     back.weight_grads);
          if (!grads.bias_grads[static_cast<std::size_t>(i)].empty())
            add_into(grads.bias_grads[static_cast<std::size_t>(i)],
                     back.bias_grads);
          gin = std::move(back.input_grad);
        }
        break;
      }
      case LayerKind::relu: {
        gin = FeatureStackD(in.channels(), in.height(), in.width());
        const std::vector<float>& iv = in.data();
        for (std::size_t p = 0; p < gin.v.size(); ++p)
          gin.v[p] = iv[p] > 0.0f ? gy.v[p] : 0.0;
        break;
      }
      case LayerKind::pool_avg: {
        gin = FeatureStackD(in.channels(), in.height(), in.width());
        const ConvGeometry& g = layer.geometry;
        double window = static_cast<double>(layer.pool_h) * layer.pool_w;
        for (int c = 0; c < gy.channels; ++c)
          for (int oy = 0; oy < gy.height; ++oy)
            for (int ox = 0; ox < gy.width; ++ox) {
              double share = gy.at(c, oy, ox) / window;
              if (share == 0.0) continue;
              for (int ky = 0; ky < layer.pool_h; ++ky) {
                int iy = oy * g.stride_h - g.pad_h + ky;
                if (iy < 0 || iy >= in.height()) continue;
                for (int kx = 0; kx < layer.pool_w; ++kx) {
                  int ix = ox * g.stride_w - g.pad_w + kx;
                  if (ix < 0 || ix >= in.width()) continue;
                  gin.at(c, iy, ix) += share;
                }
              }
            }
        break;
      }
      case LayerKind::flatten: {
        gin = FeatureStackD(in.channels(), in.height(), in.width());
        gin.v = gy.v;  // flatten preserves the element order
        break;
      }
      case LayerKind::residual_add: {
        gin = gy;  // pass-through branch
        if (layer.residual_source >= 0) {
          FeatureStackD& src =
              gout[static_cast<std::size_t>(layer.residual_source)];
          for (std::size_t p = 0; p < src.v.size(); ++p) src.v[p] += gy.v[p];
        }
        // A source of -1 is the model input; its gradient is discarded.
        break;
      }
    }
    if (i > 0) {
      FeatureStackD& dst = gout[static_cast<std::size_t>(i - 1)];
      for (std::size_t p = 0; p < dst.v.size(); ++p) dst.v[p] += gin.v[p];
    }
  }
  return loss;
}

double cross_entropy_loss(const ModelGraph& m, const FeatureStack& x,
                          int label) {
  FeatureStack final = forward(m, x, 1);
  return softmax_cross_entropy(final, label, nullptr);
}

SgdOptimizer::SgdOptimizer(const ModelGraph& m, const TrainConfig& cfg)
    : cfg_(cfg) {
  cfg_.validate();
  velocity_.init_for(m, cfg.update_exempt);
}

void SgdOptimizer::step(ModelGraph& m, const ModelGrads& grads) {
  if (grads.centroid_grads.size() != m.layers.size())
    fail(errc::invalid_argument, "gradients do not match the model");
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    LayerSpec& layer = m.layers[i];
    if (!grads.centroid_grads[i].empty()) {
      CompressedLayer& cl = *layer.compressed;
      for (int c = 0; c < cl.in_channels; ++c) {
        std::vector<float>& params = cl.centroids[static_cast<std::size_t>(c)];
        const std::vector<double>& g =
            grads.centroid_grads[i][static_cast<std::size_t>(c)];
        std::vector<double>& v =
            velocity_.centroid_grads[i][static_cast<std::size_t>(c)];
        for (std::size_t t = 0; t < params.size(); ++t) {
          double grad = g[t] + cfg_.weight_decay * params[t];
          v[t] = cfg_.momentum * v[t] + grad;
          params[t] = static_cast<float>(params[t] - cfg_.learning_rate * v[t]);
        }
      }
    }
    if (!grads.weight_grads[i].empty()) {
      std::vector<float>& params = layer.weights->data();
      const std::vector<double>& g = grads.weight_grads[i];
      std::vector<double>& v = velocity_.weight_grads[i];
      for (std::size_t t = 0; t < params.size(); ++t) {
        double grad = g[t] + cfg_.weight_decay * params[t];
        v[t] = cfg_.momentum * v[t] + grad;
        params[t] = static_cast<float>(params[t] - cfg_.learning_rate * v[t]);
      }
    }
    if (!grads.bias_grads[i].empty()) {
      std::vector<float>& params = layer.bias;
      const std::vector<double>& g = grads.bias_grads[i];
      std::vector<double>& v = velocity_.bias_grads[i];
      for (std::size_t t = 0; t < params.size(); ++t) {
        v[t] = cfg_.momentum * v[t] + g[t];  // no decay on biases
        params[t] = static_cast<float>(params[t] - cfg_.learning_rate * v[t]);
      }
    }
  }
}

std::vector<double> train(ModelGraph& m, const Dataset& ds,
                          const TrainConfig& cfg) {
  cfg.validate();
  m.validate();
  ds.validate();
  if (ds.size() == 0) fail(errc::invalid_argument, "dataset is empty");
  if (!(ds.shape == m.input_shape))
    fail(errc::shape, "dataset shape " + ds.shape.str() +
                          " does not match model input " +
                          m.input_shape.str());
  std::size_t classes = m.output_shape().count();
  for (int label : ds.labels)
    if (static_cast<std::size_t>(label) >= classes)
      fail(errc::invalid_argument,
           "label " + std::to_string(label) + " out of range for " +
               std::to_string(classes) + " model outputs");

  SgdOptimizer optimizer(m, cfg);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_indices(order, rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t count = std::min(static_cast<std::size_t>(cfg.batch_size),
                                   order.size() - start);
      // Per-example gradients computed in parallel, reduced in batch order.
      std::vector<ModelGrads> example_grads(count);
      std::vector<double> example_loss(count);
      parallel_for(count, cfg.workers, [&](std::size_t t) {
        std::size_t idx = order[start + t];
        example_loss[t] =
            loss_and_gradients(m, ds.images[idx], ds.labels[idx],
                               cfg.update_exempt, example_grads[t]);
      });
      ModelGrads batch;
      batch.init_for(m, cfg.update_exempt);
      for (std::size_t t = 0; t < count; ++t) {
        batch.accumulate(example_grads[t]);
        epoch_loss += example_loss[t];
      }
      batch.scale(1.0 / static_cast<double>(count));
      optimizer.step(m, batch);
    }
    trace.push_back(epoch_loss / static_cast<double>(ds.size()));
  }
  return trace;
}

std::vector<double> finetune(ModelGraph& m, const Dataset& ds,
                             const TrainConfig& cfg) {
  if (!m.has_compressed_payload())
    fail(errc::state, "fine-tuning needs a model with compressed payloads");
  TrainConfig frozen = cfg;
  frozen.update_exempt = false;  // centroids only
  return train(m, ds, frozen);
}

double evaluate_accuracy(const ModelGraph& m, const Dataset& ds, int workers) {
  m.validate();
  ds.validate();
  if (ds.size() == 0) fail(errc::invalid_argument, "dataset is empty");
  if (!(ds.shape == m.input_shape))
    fail(errc::shape, "dataset shape " + ds.shape.str() +
                          " does not match model input " +
                          m.input_shape.str());
  std::vector<std::uint8_t> correct(ds.size(), 0);
  parallel_for(ds.size(), workers, [&](std::size_t i) {
    FeatureStack out = forward(m, ds.images[i], 1);
    const std::vector<float>& z = out.data();
    std::size_t best = 0;
    for (std::size_t j = 1; j < z.size(); ++j)
      if (z[j] > z[best]) best = j;  // ties keep the lower index
    correct[i] = best == static_cast<std::size_t>(ds.labels[i]) ? 1 : 0;
  });
  std::size_t hits = 0;
  for (std::uint8_t c : correct) hits += c;
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

}  // namespace kse
