//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
#include "toy_fixture.hpp"

#include <cmath>
#include <random>

#include "kse/finetune.hpp"

namespace toy {
namespace {

// Uniform in [0,1) from the top 53 bits; identical on every platform, unlike
// std::uniform_real_distribution.
double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller; one draw per call keeps the stream easy to reason about.
double gauss(std::mt19937_64& rng) {
  double u = 1.0 - u01(rng);  // (0,1]
  double v = u01(rng);
  return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586 * v);
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<float> random_kernels(std::mt19937_64& rng, int n, int c, int kh,
                                  int kw) {
  double fan_in = static_cast<double>(c) * kh * kw;
  double stddev = std::sqrt(2.0 / fan_in);
  std::vector<float> out(static_cast<std::size_t>(n) * c * kh * kw);
  for (float& w : out) w = static_cast<float>(stddev * gauss(rng));
  return out;
}

}  // namespace

kse::Dataset make_dataset(const FixtureConfig& cfg, std::uint64_t salt) {
  kse::Dataset ds;
  ds.shape = {1, cfg.height, cfg.width};
  std::mt19937_64 rng(mix64(cfg.seed ^ mix64(salt)));
  double qh = cfg.height / 4.0, qw = cfg.width / 4.0;
  for (int label = 0; label < cfg.classes; ++label) {
    // Quadrant centers in row-major order: TL, TR, BL, BR.
    double cy = (label / 2 == 0 ? qh : 3.0 * qh);
    double cx = (label % 2 == 0 ? qw : 3.0 * qw);
    for (int i = 0; i < cfg.per_class; ++i) {
      kse::FeatureStack img(1, cfg.height, cfg.width);
      double jy = cy + (u01(rng) - 0.5) * qh;
      double jx = cx + (u01(rng) - 0.5) * qw;
      double amp = 0.8 + 0.4 * u01(rng);
      double sigma = 0.11 * cfg.height + 0.4 * u01(rng);
      for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x) {
          double d2 = (y - jy) * (y - jy) + (x - jx) * (x - jx);
          double value = amp * std::exp(-d2 / (2.0 * sigma * sigma)) +
                         0.08 * gauss(rng);
          img.at(0, y, x) = static_cast<float>(value);
        }
      ds.images.push_back(std::move(img));
      ds.labels.push_back(label);
    }
  }
  return ds;
}

kse::ModelGraph make_model(std::uint64_t seed) {
  std::mt19937_64 rng(mix64(seed));
  kse::ConvGeometry same{1, 1, 1, 1};
  kse::ConvGeometry pool{2, 2, 0, 0};

  kse::ModelGraph m;
  m.input_shape = {1, 16, 16};
  m.layers.push_back(kse::make_conv_layer(
      "conv1", kse::WeightTensor(12, 1, 3, 3, random_kernels(rng, 12, 1, 3, 3)),
      same, std::vector<float>(12, 0.0f)));
  m.layers.push_back(kse::make_relu_layer());
  m.layers.push_back(kse::make_pool_avg_layer(2, 2, pool));
  m.layers.push_back(kse::make_conv_layer(
      "conv2",
      kse::WeightTensor(12, 12, 3, 3, random_kernels(rng, 12, 12, 3, 3)), same,
      std::vector<float>(12, 0.0f)));
  m.layers.push_back(kse::make_relu_layer());
  m.layers.push_back(kse::make_conv_layer(
      "conv3",
      kse::WeightTensor(12, 12, 3, 3, random_kernels(rng, 12, 12, 3, 3)), same,
      std::vector<float>(12, 0.0f)));
  m.layers.push_back(kse::make_relu_layer());
  m.layers.push_back(kse::make_pool_avg_layer(2, 2, pool));
  m.layers.push_back(kse::make_flatten_layer());
  m.layers.push_back(kse::make_fc_layer(
      "fc", 4, 192, random_kernels(rng, 4, 192, 1, 1),
      std::vector<float>(4, 0.0f)));
  m.apply_default_exemptions();
  m.validate();
  return m;
}

std::vector<double> train_baseline(kse::ModelGraph& m, const kse::Dataset& ds,
                                   int epochs, double learning_rate,
                                   double weight_decay, std::uint64_t seed) {
  kse::TrainConfig cfg;
  cfg.learning_rate = learning_rate;
  cfg.momentum = 0.9;
  cfg.epochs = epochs;
  cfg.batch_size = 16;
  cfg.seed = seed;
  cfg.weight_decay = weight_decay;
  cfg.update_exempt = true;
  return kse::train(m, ds, cfg);
}

}  // namespace toy
