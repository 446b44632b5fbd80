//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <string>
#include <vector>

#include "kse/model.hpp"
#include "kse/tensor.hpp"

namespace kse {

// Labeled image tensors. On disk: a directory with dataset.manifest.json
// (shape plus one {image file, integer label} record per example) and one
// raw little-endian float32 blob per image.
struct Dataset {
  Shape3 shape;
  std::vector<FeatureStack> images;
  std::vector<int> labels;

  std::size_t size() const { return images.size(); }
  void validate() const;
};

Dataset load_dataset(const std::string& dir);
void save_dataset(const Dataset& ds, const std::string& dir);

}  // namespace kse
