//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "kse/analysis.hpp"
#include "kse/error.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using kse::WeightTensor;

namespace {

// One-dimensional kernels: N filters, one channel, 1x1 kernels.
WeightTensor kernels_1d(const std::vector<float>& values) {
  return WeightTensor(static_cast<int>(values.size()), 1, 1, 1, values);
}

}  // namespace

TEST_CASE("kernel sparsity is the channel's l1 mass") {
  CHECK(kse::kernel_sparsity(WeightTensor::zeros(4, 2, 3, 3), 1) == 0.0);
  CHECK(kse::kernel_sparsity(kernels_1d({3.0f, -4.0f}), 0) == 7.0);

  std::mt19937_64 rng(31);
  WeightTensor w = oracle::random_weights(rng, 5, 3, 3, 3);
  WeightTensor w2 = w;
  for (float& v : w2.data()) v *= 2.0f;
  for (int c = 0; c < 3; ++c)
    CHECK(kse::kernel_sparsity(w2, c) ==
          doctest::Approx(2.0 * kse::kernel_sparsity(w, c)).epsilon(1e-12));
}

TEST_CASE("knn distance matrix on collinear kernels") {
  kse::NeighborMatrix a = kse::knn_distance_matrix(kernels_1d({0, 1, 10}), 0, 1);
  CHECK(a.n == 3);
  CHECK(a.k == 1);
  CHECK(a.at(0, 1) == 1.0);
  CHECK(a.at(1, 0) == 1.0);
  CHECK(a.at(2, 1) == 9.0);
  int nonzero = 0;
  for (double v : a.a)
    if (v != 0.0) ++nonzero;
  CHECK(nonzero == 3);

  // kNN relations need not be symmetric: {0,1,3} with k=1.
  kse::NeighborMatrix b = kse::knn_distance_matrix(kernels_1d({0, 1, 3}), 0, 1);
  CHECK(b.at(1, 2) != b.at(2, 1));
}

TEST_CASE("knn requires two kernels and clamps k") {
  CHECK_THROWS_AS(
      static_cast<void>(kse::knn_distance_matrix(kernels_1d({1.0f}), 0, 1)),
      kse::error);
  kse::NeighborMatrix a =
      kse::knn_distance_matrix(kernels_1d({0, 1, 10}), 0, 99);
  CHECK(a.k == 2);
}

TEST_CASE("density metric sums neighbor rows") {
  kse::NeighborMatrix a = kse::knn_distance_matrix(kernels_1d({0, 1, 10}), 0, 1);
  std::vector<double> dm = kse::density_metric(a);
  CHECK(dm == std::vector<double>{1.0, 1.0, 9.0});

  // Identical kernels: all distances zero.
  kse::NeighborMatrix z =
      kse::knn_distance_matrix(kernels_1d({2, 2, 2, 2}), 0, 2);
  for (double v : kse::density_metric(z)) CHECK(v == 0.0);
}

TEST_CASE("kernel entropy matches the hand formula on dm = [1,1,9]") {
  kse::NeighborMatrix a = kse::knn_distance_matrix(kernels_1d({0, 1, 10}), 0, 1);
  double want = -(1.0 / 11.0) * std::log2(1.0 / 11.0) * 2.0 -
                (9.0 / 11.0) * std::log2(9.0 / 11.0);
  CHECK(kse::kernel_entropy(a) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("kernel entropy hits the uniform limit") {
  // All kernels identical: dm = 0 everywhere, defined as log2 N.
  kse::NeighborMatrix z = kse::knn_distance_matrix(kernels_1d({5, 5, 5}), 0, 2);
  CHECK(kse::kernel_entropy(z) == doctest::Approx(std::log2(3.0)).epsilon(1e-12));

  // Standard-basis kernels form a regular simplex: every pairwise distance
  // is sqrt(2), so dm is uniform and nonzero.
  int n = 4;
  std::vector<float> data(static_cast<std::size_t>(n) * n, 0.0f);
  for (int i = 0; i < n; ++i) data[static_cast<std::size_t>(i) * n + i] = 1.0f;
  WeightTensor w(n, 1, 2, 2, data);
  kse::NeighborMatrix a = kse::knn_distance_matrix(w, 0, 2);
  CHECK(kse::kernel_entropy(a) == doctest::Approx(std::log2(4.0)).epsilon(1e-12));
}

TEST_CASE("kernel entropy of a degenerate distribution is zero") {
  // Three coincident kernels and one far out: only the far row has mass.
  kse::NeighborMatrix a =
      kse::knn_distance_matrix(kernels_1d({0, 0, 0, 9}), 0, 1);
  CHECK(kse::kernel_entropy(a) == 0.0);
}

TEST_CASE("kernel entropy is exactly permutation invariant") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    int n = oracle::uniform_int(rng, 2, 12);
    WeightTensor w = oracle::random_weights(rng, n, 1, 3, 3);
    double e0 = kse::kernel_entropy(kse::knn_distance_matrix(w, 0, 5));
    // Random filter permutation of the single channel.
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i)
      std::swap(perm[static_cast<std::size_t>(i)],
                perm[rng() % static_cast<std::uint64_t>(i + 1)]);
    WeightTensor p = WeightTensor::zeros(n, 1, 3, 3);
    for (int i = 0; i < n; ++i) {
      auto src = w.kernel(perm[static_cast<std::size_t>(i)], 0);
      auto dst = p.kernel(i, 0);
      std::copy(src.begin(), src.end(), dst.begin());
    }
    double e1 = kse::kernel_entropy(kse::knn_distance_matrix(p, 0, 5));
    CHECK(e0 == e1);  // bitwise, thanks to ordered summation
  }
}

TEST_CASE("entropy stays within [0, log2 N] on random channels") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    int n = oracle::uniform_int(rng, 2, 16);
    int k = oracle::uniform_int(rng, 1, 8);
    WeightTensor w = oracle::random_weights(rng, n, 2, 2, 2);
    for (int c = 0; c < 2; ++c) {
      double e = kse::kernel_entropy(kse::knn_distance_matrix(w, c, k));
      CHECK(e >= 0.0);
      CHECK(e <= std::log2(static_cast<double>(n)) + 1e-15);
    }
  }
}

TEST_CASE("minmax normalization") {
  CHECK(kse::minmax_normalize(std::vector<double>{0, 5, 10}) ==
        std::vector<double>{0.0, 0.5, 1.0});
  CHECK(kse::minmax_normalize(std::vector<double>{3, 3, 3}) ==
        std::vector<double>{1.0, 1.0, 1.0});
  CHECK_THROWS_AS(
      static_cast<void>(kse::minmax_normalize(std::vector<double>{})),
      kse::error);
  CHECK_THROWS_AS(static_cast<void>(kse::minmax_normalize(
                      std::vector<double>{1.0, std::nan("")})),
                  kse::error);

  std::mt19937_64 rng(34);
  std::vector<double> v(9);
  for (double& x : v) x = oracle::uniform(rng, -4, 4);
  std::vector<double> nv = kse::minmax_normalize(v);
  CHECK(*std::min_element(nv.begin(), nv.end()) == 0.0);
  CHECK(*std::max_element(nv.begin(), nv.end()) == 1.0);
}

TEST_CASE("indicator formula") {
  CHECK(kse::kse_indicator(1.0, 0.0, 1.0) == 1.0);
  CHECK(kse::kse_indicator(0.0, 0.7, 1.0) == 0.0);
  CHECK(kse::kse_indicator(1.0, 1.0, 1.0) ==
        doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
}

TEST_CASE("analyze_layer handles identical channels and permutations") {
  std::mt19937_64 rng(35);
  // All channels carry the same kernel slice: both normalizations hit the
  // constant-vector rule, so every indicator is 1.
  WeightTensor w = WeightTensor::zeros(4, 3, 2, 2);
  for (int n = 0; n < 4; ++n)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x)
          w.at(n, c, y, x) = static_cast<float>(n + 2 * y - x);
  kse::KseReport r = kse::analyze_layer(w, 5, 1.0);
  for (double v : r.indicator) CHECK(v == 1.0);

  // Permuting channels permutes the report entries identically.
  WeightTensor w2 = oracle::random_weights(rng, 4, 3, 3, 3);
  kse::KseReport a = kse::analyze_layer(w2, 5, 1.0);
  WeightTensor swapped = WeightTensor::zeros(4, 3, 3, 3);
  int perm[3] = {2, 0, 1};
  for (int n = 0; n < 4; ++n)
    for (int c = 0; c < 3; ++c) {
      auto src = w2.kernel(n, perm[c]);
      auto dst = swapped.kernel(n, c);
      std::copy(src.begin(), src.end(), dst.begin());
    }
  kse::KseReport b = kse::analyze_layer(swapped, 5, 1.0);
  for (int c = 0; c < 3; ++c) {
    CHECK(b.indicator[static_cast<std::size_t>(c)] ==
          a.indicator[static_cast<std::size_t>(perm[c])]);
    CHECK(b.sparsity_raw[static_cast<std::size_t>(c)] ==
          a.sparsity_raw[static_cast<std::size_t>(perm[c])]);
    CHECK(b.entropy_raw[static_cast<std::size_t>(c)] ==
          a.entropy_raw[static_cast<std::size_t>(perm[c])]);
  }

  CHECK_THROWS_AS(
      static_cast<void>(kse::analyze_layer(WeightTensor::zeros(1, 3, 3, 3), 5, 1.0)),
      kse::error);
}

TEST_CASE("analyze_model skips exempt layers and is worker independent") {
  std::mt19937_64 rng(36);
  oracle::ModelOptions opt;
  opt.max_weight_layers = 3;
  opt.with_fc_head = true;
  opt.allow_residual = false;  // keeps every conv at N >= 2 for the analysis
  kse::ModelGraph m = oracle::random_dense_model(rng, opt);
  m.apply_default_exemptions();

  std::vector<kse::KseReport> serial = kse::analyze_model(m, 5, 1.0, 1);
  std::vector<kse::KseReport> parallel = kse::analyze_model(m, 5, 1.0, 4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].layer_id == parallel[i].layer_id);
    CHECK(serial[i].indicator == parallel[i].indicator);
    CHECK(serial[i].sparsity_raw == parallel[i].sparsity_raw);
    CHECK(serial[i].entropy_raw == parallel[i].entropy_raw);
  }
  for (const kse::KseReport& r : serial) {
    CHECK_FALSE(m.layers[static_cast<std::size_t>(r.layer_id)].compress_exempt);
    CHECK(m.layers[static_cast<std::size_t>(r.layer_id)].weight_bearing());
  }

  // All layers exempt -> nothing to analyze.
  kse::ModelGraph all_exempt = m;
  for (kse::LayerSpec& layer : all_exempt.layers) layer.compress_exempt = true;
  CHECK(kse::analyze_model(all_exempt, 5, 1.0).empty());
}

TEST_CASE("reports round-trip through the JSONL file") {
  oracle::TempDir dir("reports");
  std::mt19937_64 rng(37);
  oracle::ModelOptions opt;
  opt.max_weight_layers = 3;
  opt.allow_residual = false;
  kse::ModelGraph m = oracle::random_dense_model(rng, opt);
  std::vector<kse::KseReport> reports = kse::analyze_model(m, 5, 1.0);
  REQUIRE_FALSE(reports.empty());
  kse::save_reports(reports, dir.file("r.jsonl"));
  std::vector<kse::KseReport> back = kse::load_reports(dir.file("r.jsonl"));
  REQUIRE(back.size() == reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    CHECK(back[i].layer_id == reports[i].layer_id);
    CHECK(back[i].layer_name == reports[i].layer_name);
    CHECK(back[i].n_filters == reports[i].n_filters);
    CHECK(back[i].k_neighbors == reports[i].k_neighbors);
    CHECK(back[i].alpha == reports[i].alpha);
    CHECK(back[i].sparsity_raw == reports[i].sparsity_raw);
    CHECK(back[i].entropy_raw == reports[i].entropy_raw);
    CHECK(back[i].sparsity_norm == reports[i].sparsity_norm);
    CHECK(back[i].entropy_norm == reports[i].entropy_norm);
    CHECK(back[i].indicator == reports[i].indicator);
  }

  std::ofstream bad(dir.file("bad.jsonl"));
  bad << "{\"layer_id\": 0\n";
  bad.close();
  CHECK_THROWS_AS(static_cast<void>(kse::load_reports(dir.file("bad.jsonl"))),
                  kse::error);
}
