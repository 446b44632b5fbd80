//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale fine-tuning of compressed models with a softmax cross-entropy
// head. Only cluster centroids are updated by default; index tables, q
// vectors and exempt dense layers stay frozen. Gradients flow in double
// precision over the float32 forward activations.
#pragma once

#include <cstdint>
#include <vector>

#include "kse/dataset.hpp"
#include "kse/model.hpp"
#include "kse/tensor.hpp"

namespace kse {

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  int epochs = 5;
  int batch_size = 32;
  std::uint64_t seed = 0x6b7365ULL;
  double weight_decay = 0.0;
  // When true, dense weight-bearing layers (including exempt ones) are
  // trained as well. finetune() keeps this off; the generic train() loop
  // honors it.
  bool update_exempt = false;
  int workers = 0;

  void validate() const;
};

// Double-precision gradient stack mirroring a FeatureStack.
struct FeatureStackD {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> v;

  FeatureStackD() = default;
  FeatureStackD(int c, int h, int w)
      : channels(c), height(h), width(w),
        v(static_cast<std::size_t>(c) * h * w, 0.0) {}
  double at(int c, int y, int x) const {
    return v[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double& at(int c, int y, int x) {
    return v[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::size_t plane_size() const {
    return static_cast<std::size_t>(height) * width;
  }
};

struct CompressedBackward {
  // [c] -> q_c * Kh*Kw gradients, aligned with CompressedLayer::centroids.
  std::vector<std::vector<double>> centroid_grads;
  FeatureStackD input_grad;
};

struct DenseBackward {
  std::vector<double> weight_grads;  // aligned with WeightTensor::data
  std::vector<double> bias_grads;    // one per filter (empty if no bias)
  FeatureStackD input_grad;
};

// Backward pass of one compressed conv layer. The gradient of centroid
// B[i,c] is the valid cross-correlation of input channel c with the sum of
// the output gradients of every filter whose index selects i; the input
// gradient is the transposed convolution with the selected kernels.
CompressedBackward backward_compressed_layer(const FeatureStack& x,
                                             const CompressedLayer& layer,
                                             const ConvGeometry& g,
                                             const FeatureStackD& grad_out);

// Same for a dense conv / fully-connected layer.
DenseBackward backward_dense_layer(const FeatureStack& x,
                                   const WeightTensor& w,
                                   const ConvGeometry& g, bool has_bias,
                                   const FeatureStackD& grad_out);

// Parameter gradients for a whole model, aligned with trainable storage.
struct ModelGrads {
  // [layer] -> per-channel centroid grads (compressed layers only).
  std::vector<std::vector<std::vector<double>>> centroid_grads;
  // [layer] -> dense weight grads (only filled when update_exempt).
  std::vector<std::vector<double>> weight_grads;
  std::vector<std::vector<double>> bias_grads;

  void init_for(const ModelGraph& m, bool update_exempt);
  void accumulate(const ModelGrads& other);
  void scale(double factor);
};

// Forward with per-layer activation capture, softmax cross-entropy loss
// against `label`, and backward accumulation into `grads`. Returns the loss.
double loss_and_gradients(const ModelGraph& m, const FeatureStack& x,
                          int label, bool update_exempt, ModelGrads& grads);

// Cross-entropy loss only (no gradients).
double cross_entropy_loss(const ModelGraph& m, const FeatureStack& x,
                          int label);

// Momentum SGD over centroids (and dense layers when cfg.update_exempt).
// Index tables, q vectors and frozen payloads are never touched.
class SgdOptimizer {
 public:
  SgdOptimizer(const ModelGraph& m, const TrainConfig& cfg);
  void step(ModelGraph& m, const ModelGrads& grads);

 private:
  TrainConfig cfg_;
  ModelGrads velocity_;
};

// Generic mini-batch SGD loop; returns the per-epoch mean loss. Shuffling
// and therefore the loss trace are deterministic in cfg.seed.
std::vector<double> train(ModelGraph& m, const Dataset& ds,
                          const TrainConfig& cfg);

// Centroid-only fine-tuning; requires a model with compressed payloads.
std::vector<double> finetune(ModelGraph& m, const Dataset& ds,
                             const TrainConfig& cfg);

// Top-1 accuracy of a model over a labeled dataset.
double evaluate_accuracy(const ModelGraph& m, const Dataset& ds,
                         int workers = 0);

}  // namespace kse
