//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <vector>

#include "kse/dataset.hpp"
#include "kse/model.hpp"

namespace toy {

// Synthetic quadrant task: each class lights up a Gaussian blob inside its
// own quadrant of a 1x16x16 image over a low-amplitude noise floor. The
// task is separable, so a small net trains to high accuracy in seconds.
struct FixtureConfig {
  int classes = 4;
  int per_class = 60;  // images per class
  int height = 16;
  int width = 16;
  std::uint64_t seed = 0x746f79ULL;
};

// `salt` decorrelates splits drawn from the same config (train vs. eval).
kse::Dataset make_dataset(const FixtureConfig& cfg, std::uint64_t salt);

// Three-conv classifier over 1x16x16 inputs:
//   conv 1->12 3x3 pad 1, relu, avgpool 2x2,
//   conv 12->12 3x3 pad 1, relu,
//   conv 12->12 3x3 pad 1, relu, avgpool 2x2,
//   flatten, fc 192->4.
// First and last weight-bearing layers carry the default exemptions.
kse::ModelGraph make_model(std::uint64_t seed);

// Supervised baseline training; updates every dense layer. Returns the
// per-epoch loss trace.
std::vector<double> train_baseline(kse::ModelGraph& m, const kse::Dataset& ds,
                                   int epochs, double learning_rate,
                                   double weight_decay, std::uint64_t seed);

}  // namespace toy
