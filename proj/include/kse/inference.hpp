//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Dense and compressed forward passes. The compressed path splits each conv
// layer into 2D convolution (one shared activation map per centroid) and
// channel fusion (per output channel, sum the maps its indices select).
// Shared maps and fusion sums are kept in double and rounded to float32
// once per output value.
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "kse/model.hpp"
#include "kse/tensor.hpp"

namespace kse {

// Exact multiply-add counts per layer. `multiply_adds` follows the
// convolution-only convention that drives the acceleration ratio (channel
// fusion additions excluded); `strict_ops` additionally counts the stage-2
// additions of compressed layers.
struct FlopCount {
  struct Layer {
    std::uint64_t multiply_adds = 0;
    std::uint64_t strict_ops = 0;
  };
  std::vector<Layer> layers;
  std::uint64_t total_multiply_adds = 0;
  std::uint64_t total_strict_ops = 0;
};

// Observation hook: called after each layer with its input and output.
using LayerObserver =
    std::function<void(int layer_index, const FeatureStack& input,
                       const FeatureStack& output)>;

// Layer-by-layer evaluation of a model whose weight-bearing layers are all
// dense. Supports conv, fully-connected (1x1 conv), relu, residual-add,
// average pooling and flatten.
FeatureStack forward_dense(const ModelGraph& m, const FeatureStack& x,
                           int workers = 0,
                           const LayerObserver& observer = nullptr);

// Forward pass over a model with compressed payloads (exempt layers may stay
// dense). Numerically equals the dense forward over the expanded kernels.
FeatureStack forward_compressed(const ModelGraph& m, const FeatureStack& x,
                                int workers = 0,
                                const LayerObserver& observer = nullptr);

// Evaluates any model, dispatching per layer payload.
FeatureStack forward(const ModelGraph& m, const FeatureStack& x,
                     int workers = 0, const LayerObserver& observer = nullptr);

// Multiply-add counts for every layer given an input shape. Dense conv
// layers count N*C*Hout*Wout*Kh*Kw; compressed layers count
// (sum_c q_c)*Hout*Wout*Kh*Kw.
FlopCount count_flops(const ModelGraph& m, const Shape3& input_shape);

}  // namespace kse
