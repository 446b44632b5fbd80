//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "doctest.h"
#include "kse/analysis.hpp"
#include "kse/clustering.hpp"
#include "kse/error.hpp"
#include "kse/finetune.hpp"
#include "kse/inference.hpp"
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

// Identity clustering of a dense tensor: centroid i of channel c is the
// kernel of filter i; every filter selects its own centroid.
kse::CompressedLayer identity_payload(const kse::WeightTensor& w) {
  kse::CompressedLayer cl;
  cl.n_filters = w.n_filters();
  cl.in_channels = w.in_channels();
  cl.kernel_h = w.kernel_h();
  cl.kernel_w = w.kernel_w();
  int ks = cl.kernel_h * cl.kernel_w;
  cl.q.assign(static_cast<std::size_t>(cl.in_channels),
              static_cast<std::uint16_t>(cl.n_filters));
  cl.centroids.resize(static_cast<std::size_t>(cl.in_channels));
  cl.index.resize(static_cast<std::size_t>(cl.in_channels));
  for (int c = 0; c < cl.in_channels; ++c) {
    auto& cent = cl.centroids[static_cast<std::size_t>(c)];
    cent.resize(static_cast<std::size_t>(cl.n_filters) * ks);
    auto& idx = cl.index[static_cast<std::size_t>(c)];
    idx.resize(static_cast<std::size_t>(cl.n_filters));
    for (int f = 0; f < cl.n_filters; ++f) {
      idx[static_cast<std::size_t>(f)] = static_cast<std::uint16_t>(f + 1);
      for (int t = 0; t < ks; ++t)
        cent[static_cast<std::size_t>(f * ks + t)] =
            w.data()[static_cast<std::size_t>(
                (f * cl.in_channels + c) * ks + t)];
    }
  }
  cl.validate();
  return cl;
}

int model_classes(const kse::ModelGraph& m) {
  return static_cast<int>(m.output_shape().count());
}

}  // namespace

TEST_CASE("train configuration validation") {
  auto code = [](kse::TrainConfig cfg) {
    try {
      cfg.validate();
    } catch (const kse::error& e) {
      return e.code();
    }
    return static_cast<kse::errc>(0);
  };
  kse::TrainConfig cfg;
  CHECK(code(cfg) == static_cast<kse::errc>(0));
  cfg.learning_rate = 0.0;  // frozen runs are allowed
  CHECK(code(cfg) == static_cast<kse::errc>(0));
  cfg.learning_rate = -0.1;
  CHECK(code(cfg) == kse::errc::config);
  cfg = kse::TrainConfig{};
  cfg.momentum = 1.0;
  CHECK(code(cfg) == kse::errc::config);
  cfg = kse::TrainConfig{};
  cfg.epochs = 0;
  CHECK(code(cfg) == kse::errc::config);
  cfg = kse::TrainConfig{};
  cfg.batch_size = 0;
  CHECK(code(cfg) == kse::errc::config);
  cfg = kse::TrainConfig{};
  cfg.weight_decay = -1e-3;
  CHECK(code(cfg) == kse::errc::config);
  cfg = kse::TrainConfig{};
  cfg.workers = -1;
  CHECK(code(cfg) == kse::errc::config);
}

TEST_CASE("centroid gradients match central finite differences") {
  std::mt19937_64 rng(90);
  long params_checked = 0;
  for (int trial = 0; trial < 10; ++trial) {
    oracle::ModelOptions opt;
    opt.allow_relu = false;  // keep the loss smooth for the FD oracle
    opt.with_fc_head = true;
    opt.max_weight_layers = 2;
    opt.max_channels = 5;
    opt.max_spatial = 8;
    kse::ModelGraph m = oracle::random_dense_model(rng, opt);
    oracle::randomize_payloads(m, rng);
    kse::FeatureStack x = oracle::random_input(rng, m.input_shape);
    int label = oracle::uniform_int(rng, 0, model_classes(m) - 1);

    kse::ModelGrads grads;
    grads.init_for(m, false);
    double loss = kse::loss_and_gradients(m, x, label, false, grads);
    CHECK(loss ==
          doctest::Approx(oracle::model_loss_double(m, x, label)).epsilon(1e-4));

    double max_grad = 0.0;
    for (const auto& per_layer : grads.centroid_grads)
      for (const auto& per_channel : per_layer)
        for (double g : per_channel) max_grad = std::max(max_grad, std::abs(g));
    double floor = 1e-3 * max_grad + 1e-10;

    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      if (!m.layers[i].has_compressed_payload()) continue;
      kse::CompressedLayer& cl = *m.layers[i].compressed;
      std::size_t cstride =
          cl.centroids.size() > 6 ? cl.centroids.size() / 6 : 1;
      for (std::size_t c = 0; c < cl.centroids.size(); c += cstride) {
        std::vector<float>& params = cl.centroids[c];
        // Sample a bounded number of parameters per channel.
        std::size_t stride = params.size() > 8 ? params.size() / 8 : 1;
        for (std::size_t t = 0; t < params.size(); t += stride) {
          float orig = params[t];
          float hi = orig + 1e-4f;
          float lo = orig - 1e-4f;
          params[t] = hi;
          double lp = oracle::model_loss_double(m, x, label);
          params[t] = lo;
          double lm = oracle::model_loss_double(m, x, label);
          params[t] = orig;
          double h_eff =
              static_cast<double>(hi) - static_cast<double>(lo);
          double fd = (lp - lm) / h_eff;
          double an = grads.centroid_grads[i][c][t];
          if (std::abs(fd) < floor && std::abs(an) < floor) continue;
          CHECK(oracle::rel_diff(an, fd, floor) < 1e-3);
          ++params_checked;
        }
      }
    }
  }
  CHECK(params_checked >= 50);
}

TEST_CASE("dense weight and bias gradients match finite differences") {
  std::mt19937_64 rng(91);
  long params_checked = 0;
  for (int trial = 0; trial < 5; ++trial) {
    oracle::ModelOptions opt;
    opt.allow_relu = false;
    opt.with_fc_head = true;
    opt.max_weight_layers = 2;
    opt.max_channels = 4;
    opt.max_spatial = 8;
    kse::ModelGraph m = oracle::random_dense_model(rng, opt);
    kse::FeatureStack x = oracle::random_input(rng, m.input_shape);
    int label = oracle::uniform_int(rng, 0, model_classes(m) - 1);

    kse::ModelGrads grads;
    grads.init_for(m, true);
    kse::loss_and_gradients(m, x, label, true, grads);

    double max_grad = 0.0;
    for (const auto& wg : grads.weight_grads)
      for (double g : wg) max_grad = std::max(max_grad, std::abs(g));
    for (const auto& bg : grads.bias_grads)
      for (double g : bg) max_grad = std::max(max_grad, std::abs(g));
    double floor = 1e-3 * max_grad + 1e-10;

    auto fd_check = [&](std::vector<float>& params, std::size_t t,
                        double analytic) {
      float orig = params[t];
      float hi = orig + 1e-4f;
      float lo = orig - 1e-4f;
      params[t] = hi;
      double lp = oracle::model_loss_double(m, x, label);
      params[t] = lo;
      double lm = oracle::model_loss_double(m, x, label);
      params[t] = orig;
      double fd = (lp - lm) /
                  (static_cast<double>(hi) - static_cast<double>(lo));
      if (std::abs(fd) < floor && std::abs(analytic) < floor) return;
      CHECK(oracle::rel_diff(analytic, fd, floor) < 1e-3);
      ++params_checked;
    };

    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      if (!grads.weight_grads[i].empty()) {
        std::vector<float>& params = m.layers[i].weights->data();
        std::size_t stride = params.size() > 12 ? params.size() / 12 : 1;
        for (std::size_t t = 0; t < params.size(); t += stride)
          fd_check(params, t, grads.weight_grads[i][t]);
      }
      if (!grads.bias_grads[i].empty()) {
        for (std::size_t t = 0; t < m.layers[i].bias.size(); ++t)
          fd_check(m.layers[i].bias, t, grads.bias_grads[i][t]);
      }
    }
  }
  CHECK(params_checked >= 30);
}

TEST_CASE("identity clustering reproduces the dense backward pass") {
  std::mt19937_64 rng(92);
  for (int trial = 0; trial < 5; ++trial) {
    int n = oracle::uniform_int(rng, 2, 6);
    int c = oracle::uniform_int(rng, 1, 4);
    kse::WeightTensor w = oracle::random_weights(rng, n, c, 3, 3);
    kse::ConvGeometry g;
    g.pad_h = g.pad_w = 1;
    kse::FeatureStack x =
        oracle::random_input(rng, kse::Shape3{c, 6, 6});
    kse::FeatureStackD grad_out(n, 6, 6);
    for (double& v : grad_out.v) v = oracle::uniform(rng, -1, 1);

    kse::DenseBackward dense =
        kse::backward_dense_layer(x, w, g, false, grad_out);
    kse::CompressedLayer cl = identity_payload(w);
    kse::CompressedBackward comp =
        kse::backward_compressed_layer(x, cl, g, grad_out);

    // Centroid i of channel c is exactly filter i's kernel on channel c.
    for (int ch = 0; ch < c; ++ch)
      for (int f = 0; f < n; ++f)
        for (int t = 0; t < 9; ++t) {
          double want =
              dense.weight_grads[static_cast<std::size_t>((f * c + ch) * 9 + t)];
          double got = comp.centroid_grads[static_cast<std::size_t>(ch)]
                                          [static_cast<std::size_t>(f * 9 + t)];
          CHECK(got == doctest::Approx(want).epsilon(1e-12));
        }
    REQUIRE(comp.input_grad.v.size() == dense.input_grad.v.size());
    for (std::size_t i = 0; i < dense.input_grad.v.size(); ++i)
      CHECK(comp.input_grad.v[i] ==
            doctest::Approx(dense.input_grad.v[i]).epsilon(1e-12));
  }
}

TEST_CASE("zero output gradient produces zero parameter gradients") {
  std::mt19937_64 rng(93);
  kse::WeightTensor w = oracle::random_weights(rng, 4, 3, 3, 3);
  kse::ConvGeometry g;
  g.pad_h = g.pad_w = 1;
  kse::FeatureStack x = oracle::random_input(rng, kse::Shape3{3, 5, 5});
  kse::FeatureStackD zero(4, 5, 5);

  kse::DenseBackward dense = kse::backward_dense_layer(x, w, g, true, zero);
  for (double v : dense.weight_grads) CHECK(v == 0.0);
  for (double v : dense.bias_grads) CHECK(v == 0.0);
  for (double v : dense.input_grad.v) CHECK(v == 0.0);

  kse::CompressedBackward comp =
      kse::backward_compressed_layer(x, identity_payload(w), g, zero);
  for (const auto& cg : comp.centroid_grads)
    for (double v : cg) CHECK(v == 0.0);
  for (double v : comp.input_grad.v) CHECK(v == 0.0);
}

TEST_CASE("hand-computed softmax regression gradients") {
  // Two inputs, two classes: z = W x + b over the flattened input.
  kse::ModelGraph m;
  m.input_shape = {2, 1, 1};
  m.layers.push_back(kse::make_flatten_layer());
  m.layers.push_back(kse::make_fc_layer("fc", 2, 2, {0.5f, -0.3f, 0.2f, 0.1f},
                                        {0.1f, -0.2f}));
  m.validate();
  kse::FeatureStack x(2, 1, 1, {1.5f, -2.0f});

  kse::ModelGrads grads;
  grads.init_for(m, true);
  double loss = kse::loss_and_gradients(m, x, 0, true, grads);

  // Reference arithmetic from the stored float values.
  double w00 = 0.5f, w01 = -0.3f, w10 = 0.2f, w11 = 0.1f;
  double b0 = 0.1f, b1 = -0.2f, x0 = 1.5f, x1 = -2.0f;
  double z0 = w00 * x0 + w01 * x1 + b0;
  double z1 = w10 * x0 + w11 * x1 + b1;
  double zmax = std::max(z0, z1);
  double e0 = std::exp(z0 - zmax), e1 = std::exp(z1 - zmax);
  double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
  double want_loss = -std::log(p0);
  CHECK(loss == doctest::Approx(want_loss).epsilon(1e-5));

  double d0 = p0 - 1.0, d1 = p1;
  CHECK(grads.weight_grads[1][0] == doctest::Approx(d0 * x0).epsilon(1e-5));
  CHECK(grads.weight_grads[1][1] == doctest::Approx(d0 * x1).epsilon(1e-5));
  CHECK(grads.weight_grads[1][2] == doctest::Approx(d1 * x0).epsilon(1e-5));
  CHECK(grads.weight_grads[1][3] == doctest::Approx(d1 * x1).epsilon(1e-5));
  CHECK(grads.bias_grads[1][0] == doctest::Approx(d0).epsilon(1e-5));
  CHECK(grads.bias_grads[1][1] == doctest::Approx(d1).epsilon(1e-5));

  CHECK(kse::cross_entropy_loss(m, x, 0) ==
        doctest::Approx(want_loss).epsilon(1e-5));
}

TEST_CASE("relu blocks gradients from inactive pixels") {
  // Pass-through conv, relu, then a 2-class head reading both pixels. The
  // second pixel is negative, so nothing upstream of it receives gradient.
  kse::ModelGraph m;
  m.input_shape = {1, 1, 2};
  kse::WeightTensor w(1, 1, 1, 1, {1.0f});
  m.layers.push_back(kse::make_conv_layer("id", w, kse::ConvGeometry{}, {}));
  m.layers.push_back(kse::make_relu_layer());
  m.layers.push_back(kse::make_flatten_layer());
  m.layers.push_back(kse::make_fc_layer("fc", 2, 2, {1.0f, 1.0f, -1.0f, 1.0f},
                                        {}));
  m.validate();
  kse::FeatureStack x(1, 1, 2, {2.0f, -3.0f});

  kse::ModelGrads grads;
  grads.init_for(m, true);
  kse::loss_and_gradients(m, x, 0, true, grads);

  // fc weights on the zeroed second pixel get zero gradient.
  CHECK(grads.weight_grads[3][1] == 0.0);
  CHECK(grads.weight_grads[3][3] == 0.0);
  CHECK(grads.weight_grads[3][0] != 0.0);
  // The conv weight only sees the active pixel: dL/dw = dL/dy0 * x0.
  CHECK(grads.weight_grads[0][0] != 0.0);
}

TEST_CASE("sgd step arithmetic") {
  std::mt19937_64 rng(94);
  kse::WeightTensor w = oracle::random_weights(rng, 3, 2, 3, 3);
  std::vector<float> bias = {0.25f, -0.5f, 1.0f};
  kse::ModelGraph m;
  m.input_shape = {2, 5, 5};
  kse::ConvGeometry g;
  g.pad_h = g.pad_w = 1;
  m.layers.push_back(kse::make_conv_layer("c", w, g, bias));
  m.validate();

  kse::ModelGrads grads;
  grads.init_for(m, true);
  std::mt19937_64 grng(95);
  for (double& v : grads.weight_grads[0]) v = oracle::uniform(grng, -1, 1);
  for (double& v : grads.bias_grads[0]) v = oracle::uniform(grng, -1, 1);

  SUBCASE("momentum-free step is the textbook update") {
    kse::TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.momentum = 0.0;
    cfg.update_exempt = true;
    kse::ModelGraph stepped = m;
    kse::SgdOptimizer opt(stepped, cfg);
    opt.step(stepped, grads);
    for (std::size_t t = 0; t < w.size(); ++t) {
      float want = static_cast<float>(
          w.data()[t] - 0.1 * grads.weight_grads[0][t]);
      CHECK(stepped.layers[0].weights->data()[t] == want);
    }
    for (std::size_t t = 0; t < bias.size(); ++t) {
      float want =
          static_cast<float>(bias[t] - 0.1 * grads.bias_grads[0][t]);
      CHECK(stepped.layers[0].bias[t] == want);
    }
  }

  SUBCASE("momentum accumulates velocity across steps") {
    kse::TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.momentum = 0.5;
    cfg.update_exempt = true;
    kse::ModelGraph stepped = m;
    kse::SgdOptimizer opt(stepped, cfg);
    opt.step(stepped, grads);
    opt.step(stepped, grads);
    // Two steps with constant gradient g: p -> p - lr*(2 + momentum)*g.
    for (std::size_t t = 0; t < w.size(); ++t) {
      double gt = grads.weight_grads[0][t];
      float after1 = static_cast<float>(w.data()[t] - 0.1 * gt);
      float want = static_cast<float>(after1 - 0.1 * (0.5 * gt + gt));
      CHECK(stepped.layers[0].weights->data()[t] == want);
    }
  }

  SUBCASE("weight decay shrinks weights but not biases") {
    kse::TrainConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.1;
    cfg.update_exempt = true;
    kse::ModelGrads zero;
    zero.init_for(m, true);
    kse::ModelGraph stepped = m;
    kse::SgdOptimizer opt(stepped, cfg);
    opt.step(stepped, zero);
    for (std::size_t t = 0; t < w.size(); ++t) {
      float want = static_cast<float>(w.data()[t] - 0.5 * 0.1 * w.data()[t]);
      CHECK(stepped.layers[0].weights->data()[t] == want);
    }
    for (std::size_t t = 0; t < bias.size(); ++t)
      CHECK(stepped.layers[0].bias[t] == bias[t]);
  }

  SUBCASE("zero gradients leave the model untouched") {
    kse::TrainConfig cfg;
    cfg.update_exempt = true;
    kse::ModelGrads zero;
    zero.init_for(m, true);
    kse::ModelGraph stepped = m;
    kse::SgdOptimizer opt(stepped, cfg);
    opt.step(stepped, zero);
    std::string why;
    CHECK_MESSAGE(oracle::models_identical(stepped, m, &why), why);
  }
}

TEST_CASE("sgd never touches index tables or budgets") {
  std::mt19937_64 rng(96);
  oracle::ModelOptions opt;
  opt.allow_relu = false;
  opt.with_fc_head = true;
  opt.max_weight_layers = 2;
  kse::ModelGraph m = oracle::random_dense_model(rng, opt);
  oracle::randomize_payloads(m, rng);
  kse::ModelGraph before = m;

  kse::Dataset ds =
      oracle::random_dataset(rng, m.input_shape, 8, model_classes(m));
  kse::TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.05;
  std::vector<double> trace = kse::finetune(m, ds, cfg);
  REQUIRE(trace.size() == 2u);

  bool centroids_changed = false;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    if (!m.layers[i].has_compressed_payload()) continue;
    const kse::CompressedLayer& a = *before.layers[i].compressed;
    const kse::CompressedLayer& b = *m.layers[i].compressed;
    CHECK(a.q == b.q);
    CHECK(a.index == b.index);
    for (std::size_t c = 0; c < a.centroids.size(); ++c)
      if (a.centroids[c] != b.centroids[c]) centroids_changed = true;
  }
  CHECK(centroids_changed);
}

TEST_CASE("training loop behavior") {
  std::mt19937_64 rng(97);
  oracle::ModelOptions opt;
  opt.allow_relu = false;
  opt.with_fc_head = true;
  opt.max_weight_layers = 1;
  opt.max_channels = 3;
  opt.max_spatial = 8;
  kse::ModelGraph m = oracle::random_dense_model(rng, opt);
  kse::Dataset ds =
      oracle::random_dataset(rng, m.input_shape, 12, model_classes(m));

  SUBCASE("zero learning rate leaves the model and loss alone") {
    kse::ModelGraph trained = m;
    kse::TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 3;
    cfg.update_exempt = true;
    std::vector<double> trace = kse::train(trained, ds, cfg);
    REQUIRE(trace.size() == 3u);
    CHECK(trace[1] == doctest::Approx(trace[0]).epsilon(1e-12));
    CHECK(trace[2] == doctest::Approx(trace[0]).epsilon(1e-12));
    std::string why;
    CHECK_MESSAGE(oracle::models_identical(trained, m, &why), why);
  }

  SUBCASE("the loss trace is deterministic in the seed") {
    kse::TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    cfg.update_exempt = true;
    cfg.seed = 123;
    kse::ModelGraph a = m;
    kse::ModelGraph b = m;
    std::vector<double> ta = kse::train(a, ds, cfg);
    std::vector<double> tb = kse::train(b, ds, cfg);
    CHECK(ta == tb);
    std::string why;
    CHECK_MESSAGE(oracle::models_identical(a, b, &why), why);
    cfg.seed = 124;
    kse::ModelGraph c = m;
    std::vector<double> tc = kse::train(c, ds, cfg);
    CHECK(ta != tc);  // a different shuffle gives a different trace
  }

  SUBCASE("the mean loss decreases on an easy problem") {
    kse::ModelGraph trained = m;
    kse::TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 4;
    cfg.learning_rate = 0.02;
    cfg.update_exempt = true;
    std::vector<double> trace = kse::train(trained, ds, cfg);
    CHECK(trace.back() < trace.front());
  }

  SUBCASE("worker count does not change the result") {
    kse::TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    cfg.update_exempt = true;
    kse::ModelGraph a = m;
    kse::ModelGraph b = m;
    cfg.workers = 1;
    std::vector<double> ta = kse::train(a, ds, cfg);
    cfg.workers = 4;
    std::vector<double> tb = kse::train(b, ds, cfg);
    CHECK(ta == tb);
    std::string why;
    CHECK_MESSAGE(oracle::models_identical(a, b, &why), why);
  }

  SUBCASE("label out of range is rejected") {
    kse::Dataset bad = ds;
    bad.labels[0] = model_classes(m) + 7;
    kse::TrainConfig cfg;
    CHECK(code_of([&] { kse::train(m, bad, cfg); }) ==
          kse::errc::invalid_argument);
  }
}

TEST_CASE("finetune freezes everything but the centroids") {
  std::mt19937_64 rng(98);
  oracle::ModelOptions opt;
  opt.allow_relu = false;
  opt.with_fc_head = true;
  opt.max_weight_layers = 2;
  opt.max_channels = 4;
  opt.max_spatial = 8;
  kse::ModelGraph dense = oracle::random_dense_model(rng, opt);

  // Fine-tuning a dense model is a state error.
  kse::Dataset ds =
      oracle::random_dataset(rng, dense.input_shape, 8, model_classes(dense));
  kse::TrainConfig cfg;
  cfg.epochs = 1;
  CHECK(code_of([&] { kse::finetune(dense, ds, cfg); }) == kse::errc::state);

  // Compress with one exempt dense layer left in place.
  dense.layers[0].compress_exempt = true;
  std::vector<kse::KseReport> reports = kse::analyze_model(dense, 3, 1.0);
  kse::CompressionConfig ccfg;
  kse::ModelGraph m = kse::compress_model(dense, reports, ccfg);
  kse::ModelGraph before = m;

  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.05;
  cfg.update_exempt = true;  // finetune() must ignore this
  std::vector<double> trace = kse::finetune(m, ds, cfg);
  REQUIRE(trace.size() == 2u);

  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const kse::LayerSpec& a = before.layers[i];
    const kse::LayerSpec& b = m.layers[i];
    if (a.weights.has_value()) {
      REQUIRE(b.weights.has_value());
      CHECK(a.weights->data() == b.weights->data());  // frozen bitwise
    }
    CHECK(a.bias == b.bias);
  }
}

TEST_CASE("accuracy evaluation") {
  // One-channel 1x1 inputs; the head copies the pixel to both logits, with
  // a bias tilt on the second class.
  kse::ModelGraph m;
  m.input_shape = {1, 1, 1};
  m.layers.push_back(kse::make_flatten_layer());
  m.layers.push_back(kse::make_fc_layer("fc", 2, 1, {1.0f, 2.0f}, {0.0f, -1.0f}));
  m.validate();
  // logits = [x, 2x - 1]: class 1 wins for x > 1, ties at x == 1.

  kse::Dataset ds;
  ds.shape = m.input_shape;
  auto add = [&](float x, int label) {
    ds.images.emplace_back(1, 1, 1, std::vector<float>{x});
    ds.labels.push_back(label);
  };
  add(0.0f, 0);   // correct: 0 > -1
  add(2.0f, 1);   // correct: 3 > 2
  add(2.0f, 0);   // wrong
  add(1.0f, 0);   // tie at 1 == 1: the lower index wins, correct
  CHECK(kse::evaluate_accuracy(m, ds) == doctest::Approx(0.75).epsilon(1e-12));

  kse::Dataset empty;
  empty.shape = m.input_shape;
  CHECK(code_of([&] { kse::evaluate_accuracy(m, empty); }) ==
        kse::errc::invalid_argument);
}
