//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "kse/analysis.hpp"
#include "kse/clustering.hpp"
#include "kse/dataset.hpp"
#include "kse/error.hpp"
#include "kse/interpret.hpp"
#include "kse/model.hpp"
#include "support/oracles.hpp"

namespace {

kse::errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const kse::error& e) {
    return e.code();
  }
  return static_cast<kse::errc>(0);
}

}  // namespace

TEST_CASE("spearman worked examples") {
  std::vector<double> x = {1, 2, 3, 4};
  CHECK(kse::spearman(x, std::vector<double>{1, 3, 2, 4}) ==
        doctest::Approx(0.8).epsilon(1e-12));
  CHECK(kse::spearman(x, std::vector<double>{4, 3, 2, 1}) ==
        doctest::Approx(-1.0).epsilon(1e-12));
  // Any strictly increasing transform preserves the ranks exactly.
  std::vector<double> squares = {1, 4, 9, 16};
  CHECK(kse::spearman(x, squares) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("spearman averages tied ranks") {
  std::vector<double> x = {1, 2, 2, 3};
  std::vector<double> y = {1, 2, 3, 4};
  // ranks(x) = [1, 2.5, 2.5, 4]: sxy = 4.5, sxx = 4.5, syy = 5.
  CHECK(kse::spearman(x, y) ==
        doctest::Approx(4.5 / std::sqrt(4.5 * 5.0)).epsilon(1e-12));
}

TEST_CASE("spearman is invariant under strictly increasing transforms") {
  std::mt19937_64 rng(80);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x(12), y(12), ty(12);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = oracle::uniform(rng, -3, 3);
      y[i] = oracle::uniform(rng, -3, 3);
      ty[i] = std::exp(y[i]);
    }
    CHECK(kse::spearman(x, y) == kse::spearman(x, ty));
  }
}

TEST_CASE("spearman input validation") {
  std::vector<double> c4 = {2, 2, 2, 2};
  std::vector<double> x4 = {1, 2, 3, 4};
  CHECK(code_of([&] { kse::spearman(c4, x4); }) == kse::errc::degenerate);
  CHECK(code_of([&] { kse::spearman(x4, c4); }) == kse::errc::degenerate);
  std::vector<double> x3 = {1, 2, 3};
  CHECK(code_of([&] { kse::spearman(x4, x3); }) == kse::errc::invalid_argument);
  std::vector<double> one = {1};
  CHECK(code_of([&] { kse::spearman(one, one); }) ==
        kse::errc::invalid_argument);
  std::vector<double> with_nan = {1, std::nan(""), 3, 4};
  CHECK(code_of([&] { kse::spearman(x4, with_nan); }) ==
        kse::errc::invalid_argument);
}

TEST_CASE("receptive mask quantile semantics") {
  SUBCASE("constant map yields an empty mask") {
    kse::Plane2D p(4, 4);
    std::fill(p.v.begin(), p.v.end(), 2.5f);
    kse::ReceptiveMask m = kse::receptive_mask(p, 4, 4, 0.25);
    CHECK(m.area() == 0);
  }

  SUBCASE("distinct values keep roughly the top quantile") {
    kse::Plane2D p(12, 12);
    std::iota(p.v.begin(), p.v.end(), 0.0f);
    kse::ReceptiveMask m = kse::receptive_mask(p, 12, 12, 0.5);
    CHECK(m.area() == 72);  // 144 values: threshold index 71, 72 above
    // The kept pixels are exactly the largest ones.
    for (std::size_t i = 0; i < p.v.size(); ++i)
      CHECK(m.mask[i] == (p.v[i] > 71.0f ? 1 : 0));
  }

  SUBCASE("area grows with the quantile and respects the bound") {
    std::mt19937_64 rng(81);
    kse::Plane2D p(9, 9);
    for (float& v : p.v) v = static_cast<float>(oracle::uniform(rng, -1, 1));
    long prev = 0;
    for (double q : {0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9}) {
      kse::ReceptiveMask m = kse::receptive_mask(p, 9, 9, q);
      CHECK(m.area() >= prev);
      prev = m.area();
      double frac = static_cast<double>(m.area()) / 81.0;
      CHECK(frac <= q + 1.0 / 81.0 + 1e-12);
    }
  }

  SUBCASE("feature maps are upscaled to input resolution first") {
    kse::Plane2D p(3, 3);
    std::iota(p.v.begin(), p.v.end(), 0.0f);
    kse::ReceptiveMask m = kse::receptive_mask(p, 12, 12, 0.25);
    CHECK(m.height == 12);
    CHECK(m.width == 12);
    CHECK(m.mask.size() == 144u);
    CHECK(m.area() > 0);
  }

  SUBCASE("quantile must be interior") {
    kse::Plane2D p(2, 2);
    CHECK(code_of([&] { kse::receptive_mask(p, 2, 2, 0.0); }) ==
          kse::errc::invalid_argument);
    CHECK(code_of([&] { kse::receptive_mask(p, 2, 2, 1.0); }) ==
          kse::errc::invalid_argument);
  }
}

TEST_CASE("feature importance accounting") {
  kse::Plane2D heat(2, 3);
  std::iota(heat.v.begin(), heat.v.end(), 1.0f);  // 1..6

  kse::ReceptiveMask mask;
  mask.height = 2;
  mask.width = 3;

  SUBCASE("full mask sums everything") {
    mask.mask.assign(6, 1);
    kse::ImportanceStats s = kse::feature_importance(mask, heat);
    CHECK(s.area == 6);
    CHECK(s.score == doctest::Approx(21.0).epsilon(1e-12));
    CHECK(s.richness == doctest::Approx(3.5).epsilon(1e-12));
  }

  SUBCASE("empty mask is all zeros") {
    mask.mask.assign(6, 0);
    kse::ImportanceStats s = kse::feature_importance(mask, heat);
    CHECK(s.area == 0);
    CHECK(s.score == 0.0);
    CHECK(s.richness == 0.0);
  }

  SUBCASE("alternating mask selects alternating pixels") {
    mask.mask = {1, 0, 1, 0, 1, 0};
    kse::ImportanceStats s = kse::feature_importance(mask, heat);
    CHECK(s.area == 3);
    CHECK(s.score == doctest::Approx(1.0 + 3.0 + 5.0).epsilon(1e-12));
    CHECK(s.richness == doctest::Approx(3.0).epsilon(1e-12));
  }

  SUBCASE("score always equals area times richness") {
    std::mt19937_64 rng(82);
    for (int trial = 0; trial < 10; ++trial) {
      kse::Plane2D h(5, 5);
      for (float& v : h.v) v = static_cast<float>(oracle::uniform(rng, -2, 2));
      kse::ReceptiveMask m;
      m.height = m.width = 5;
      m.mask.resize(25);
      for (auto& b : m.mask) b = rng() % 2;
      kse::ImportanceStats s = kse::feature_importance(m, h);
      CHECK(s.score ==
            doctest::Approx(s.richness * static_cast<double>(s.area))
                .epsilon(1e-12));
    }
  }

  SUBCASE("dimension mismatch is a shape error") {
    mask.mask.assign(6, 1);
    kse::Plane2D other(3, 3);
    CHECK(code_of([&] { kse::feature_importance(mask, other); }) ==
          kse::errc::shape);
  }
}

TEST_CASE("heat map of a pass-through net reproduces the image") {
  std::mt19937_64 rng(83);
  kse::ModelGraph m;
  m.input_shape = {1, 5, 5};
  kse::WeightTensor w(1, 1, 1, 1, {1.0f});
  m.layers.push_back(kse::make_conv_layer("id", w, kse::ConvGeometry{}, {}));
  m.validate();

  kse::FeatureStack x = oracle::random_input(rng, m.input_shape);
  kse::Plane2D heat = kse::heat_map(m, x);
  REQUIRE(heat.height == 5);
  REQUIRE(heat.width == 5);
  for (std::size_t i = 0; i < heat.size(); ++i)
    CHECK(heat.v[i] == x.data()[i]);
}

TEST_CASE("heat map is reported at input resolution") {
  std::mt19937_64 rng(84);
  kse::ModelGraph m;
  m.input_shape = {2, 6, 6};
  kse::WeightTensor w = oracle::random_weights(rng, 3, 2, 3, 3);
  kse::ConvGeometry g;
  g.stride_h = g.stride_w = 2;
  g.pad_h = g.pad_w = 1;
  m.layers.push_back(kse::make_conv_layer("down", w, g, {}));
  m.validate();

  kse::FeatureStack x = oracle::random_input(rng, m.input_shape);
  kse::Plane2D heat = kse::heat_map(m, x);
  CHECK(heat.height == 6);
  CHECK(heat.width == 6);

  kse::ModelGraph no_conv;
  no_conv.input_shape = {2, 6, 6};
  no_conv.layers.push_back(kse::make_relu_layer());
  no_conv.validate();
  CHECK(code_of([&] { kse::heat_map(no_conv, x); }) ==
        kse::errc::invalid_argument);
}

namespace {

// Study fixture: single conv layer; channel c of every image carries exactly
// `areas[c]` strictly positive pixels (distinct values) on a zero background,
// so its receptive mask has exactly that area at small quantiles.
struct StudyFixture {
  kse::ModelGraph model;
  kse::Dataset data;
  std::vector<long> areas;
};

StudyFixture make_study_fixture(std::mt19937_64& rng, bool constant_areas) {
  StudyFixture fx;
  int c_in = 6, n = 8, h = 12, w = 12;
  fx.model.input_shape = {c_in, h, w};
  kse::WeightTensor wt = oracle::random_weights(rng, n, c_in, 3, 3);
  // Per-channel magnitude scaling: kernel sparsity rises strictly with c.
  for (int f = 0; f < n; ++f)
    for (int c = 0; c < c_in; ++c)
      for (int t = 0; t < 9; ++t) {
        float& v = wt.data()[static_cast<std::size_t>((f * c_in + c) * 9 + t)];
        v = static_cast<float>((v + 2.0) * (c + 1));  // positive, scaled
      }
  kse::ConvGeometry g;
  g.pad_h = g.pad_w = 1;
  fx.model.layers.push_back(kse::make_conv_layer("study", wt, g, {}));
  fx.model.validate();

  fx.areas.resize(static_cast<std::size_t>(c_in));
  for (int c = 0; c < c_in; ++c)
    fx.areas[static_cast<std::size_t>(c)] = constant_areas ? 10 : 4 * (c + 1);

  fx.data.shape = fx.model.input_shape;
  for (int img = 0; img < 3; ++img) {
    kse::FeatureStack x(c_in, h, w);
    for (int c = 0; c < c_in; ++c) {
      float* p = x.data().data() + static_cast<std::size_t>(c) * x.plane_size();
      long budget = fx.areas[static_cast<std::size_t>(c)];
      // Distinct positive values at image-dependent offsets; zeros elsewhere.
      for (long j = 0; j < budget; ++j) {
        long pos = (j * 5 + img * 17) % (h * w);
        while (p[pos] != 0.0f) pos = (pos + 1) % (h * w);
        p[pos] = 1.0f + 0.01f * static_cast<float>(j) +
                 0.001f * static_cast<float>(img);
      }
    }
    fx.data.images.push_back(std::move(x));
    fx.data.labels.push_back(img % 2);
  }
  fx.data.validate();
  return fx;
}

}  // namespace

TEST_CASE("correlation study recovers a planted monotone relation") {
  std::mt19937_64 rng(85);
  StudyFixture fx = make_study_fixture(rng, false);
  kse::CorrelationStudy study =
      kse::correlation_study(fx.model, fx.data, 0, 0.3, 2);

  CHECK(study.layer_id == 0);
  CHECK(study.quantile == 0.3);
  REQUIRE(study.mean_area.size() == 6u);
  // Backgrounds dominate: the threshold is 0 and the mask keeps exactly the
  // planted pixels, so the per-channel mean area is the planted area.
  for (int c = 0; c < 6; ++c)
    CHECK(study.mean_area[static_cast<std::size_t>(c)] ==
          doctest::Approx(static_cast<double>(
                              fx.areas[static_cast<std::size_t>(c)]))
              .epsilon(1e-12));
  // Sparsity and planted area both rise strictly with the channel index.
  CHECK(study.rho_sparsity >= 0.999);
  for (double r : study.mean_richness) CHECK(std::isfinite(r));
  CHECK(std::abs(study.rho_richness) <= 1.0);
}

TEST_CASE("correlation study surfaces degenerate statistics") {
  std::mt19937_64 rng(86);
  StudyFixture fx = make_study_fixture(rng, true);  // equal areas everywhere
  CHECK(code_of([&] {
          kse::correlation_study(fx.model, fx.data, 0, 0.3, 2);
        }) == kse::errc::degenerate);
}

TEST_CASE("correlation study input validation") {
  std::mt19937_64 rng(87);
  StudyFixture fx = make_study_fixture(rng, false);

  CHECK(code_of([&] {
          kse::correlation_study(fx.model, fx.data, 5, 0.3, 2);
        }) == kse::errc::invalid_argument);

  kse::ModelGraph with_relu = fx.model;
  with_relu.layers.push_back(kse::make_relu_layer());
  CHECK(code_of([&] {
          kse::correlation_study(with_relu, fx.data, 1, 0.3, 2);
        }) == kse::errc::invalid_argument);

  kse::Dataset empty;
  empty.shape = fx.model.input_shape;
  CHECK(code_of([&] {
          kse::correlation_study(fx.model, empty, 0, 0.3, 2);
        }) == kse::errc::invalid_argument);

  kse::Dataset wrong = fx.data;
  wrong.shape = {6, 10, 10};
  for (auto& img : wrong.images) img = kse::FeatureStack(6, 10, 10);
  CHECK(code_of([&] {
          kse::correlation_study(fx.model, wrong, 0, 0.3, 2);
        }) == kse::errc::shape);

  // Compressed models are rejected: the study reads dense kernels.
  kse::ModelGraph comp = fx.model;
  std::vector<kse::KseReport> reports = kse::analyze_model(comp, 2, 1.0);
  kse::CompressionConfig cfg;
  comp = kse::compress_model(comp, reports, cfg);
  CHECK(code_of([&] {
          kse::correlation_study(comp, fx.data, 0, 0.3, 2);
        }) == kse::errc::state);
}

TEST_CASE("correlation study is worker independent") {
  std::mt19937_64 rng(88);
  StudyFixture fx = make_study_fixture(rng, false);
  kse::CorrelationStudy a =
      kse::correlation_study(fx.model, fx.data, 0, 0.3, 2, 1);
  kse::CorrelationStudy b =
      kse::correlation_study(fx.model, fx.data, 0, 0.3, 2, 4);
  CHECK(a.rho_sparsity == b.rho_sparsity);
  CHECK(a.rho_richness == b.rho_richness);
  CHECK(a.mean_area == b.mean_area);
  CHECK(a.mean_richness == b.mean_richness);
}
