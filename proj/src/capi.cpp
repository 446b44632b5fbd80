//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
#include "kse/kse.h"

#include <cmath>
#include <cstring>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "kse/analysis.hpp"
#include "kse/clustering.hpp"
#include "kse/dataset.hpp"
#include "kse/finetune.hpp"
#include "kse/inference.hpp"
#include "kse/interpret.hpp"
#include "kse/metrics.hpp"
#include "kse/model_io.hpp"

struct kse_model {
  kse::ModelGraph graph;
};

struct kse_report {
  std::vector<kse::KseReport> reports;
};

struct kse_dataset {
  kse::Dataset data;
};

namespace {

thread_local std::string g_last_error;

kse_status status_of(kse::errc code) {
  switch (code) {
    case kse::errc::invalid_argument: return KSE_ERROR_INVALID_ARGUMENT;
    case kse::errc::io: return KSE_ERROR_IO;
    case kse::errc::parse: return KSE_ERROR_PARSE;
    case kse::errc::corrupt: return KSE_ERROR_CORRUPT;
    case kse::errc::shape: return KSE_ERROR_SHAPE;
    case kse::errc::config: return KSE_ERROR_CONFIG;
    case kse::errc::state: return KSE_ERROR_STATE;
    case kse::errc::degenerate: return KSE_ERROR_DEGENERATE;
    case kse::errc::internal: return KSE_ERROR_INTERNAL;
  }
  return KSE_ERROR_INTERNAL;
}

template <typename Fn>
kse_status wrap(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return KSE_OK;
  } catch (const kse::error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return KSE_ERROR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return KSE_ERROR_INTERNAL;
  }
}

kse_status require(bool ok, const char* message) {
  if (ok) return KSE_OK;
  g_last_error = message;
  return KSE_ERROR_INVALID_ARGUMENT;
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* kse_status_name(kse_status status) {
  switch (status) {
    case KSE_OK: return "ok";
    case KSE_ERROR_INVALID_ARGUMENT: return "invalid_argument";
    case KSE_ERROR_IO: return "io";
    case KSE_ERROR_PARSE: return "parse";
    case KSE_ERROR_CORRUPT: return "corrupt";
    case KSE_ERROR_SHAPE: return "shape";
    case KSE_ERROR_CONFIG: return "config";
    case KSE_ERROR_STATE: return "state";
    case KSE_ERROR_DEGENERATE: return "degenerate";
    case KSE_ERROR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* kse_last_error(void) { return g_last_error.c_str(); }

kse_status kse_model_load(const char* path, kse_model** out) {
  if (kse_status s = require(path && out, "path and out must be non-NULL"))
    return s;
  return wrap([&] {
    auto model = std::make_unique<kse_model>();
    model->graph = kse::load_model(path);
    *out = model.release();
  });
}

kse_status kse_model_save(const kse_model* model, const char* path) {
  if (kse_status s = require(model && path, "model and path must be non-NULL"))
    return s;
  return wrap([&] { kse::save_model(model->graph, path); });
}

void kse_model_free(kse_model* model) { delete model; }

int kse_model_is_compressed(const kse_model* model) {
  return model && model->graph.has_compressed_payload() ? 1 : 0;
}

kse_status kse_model_input_shape(const kse_model* model, int* channels,
                                 int* height, int* width) {
  if (kse_status s = require(model != nullptr, "model must be non-NULL"))
    return s;
  if (channels) *channels = model->graph.input_shape.channels;
  if (height) *height = model->graph.input_shape.height;
  if (width) *width = model->graph.input_shape.width;
  g_last_error.clear();
  return KSE_OK;
}

int kse_model_layer_count(const kse_model* model) {
  return model ? static_cast<int>(model->graph.layers.size()) : 0;
}

kse_status kse_dataset_load(const char* dir, kse_dataset** out) {
  if (kse_status s = require(dir && out, "dir and out must be non-NULL"))
    return s;
  return wrap([&] {
    auto ds = std::make_unique<kse_dataset>();
    ds->data = kse::load_dataset(dir);
    *out = ds.release();
  });
}

void kse_dataset_free(kse_dataset* dataset) { delete dataset; }

int kse_dataset_size(const kse_dataset* dataset) {
  return dataset ? static_cast<int>(dataset->data.size()) : 0;
}

void kse_analyze_options_init(kse_analyze_options* options) {
  if (!options) return;
  options->k_neighbors = 5;
  options->alpha = 1.0;
  options->workers = 0;
}

kse_status kse_analyze(const kse_model* model,
                       const kse_analyze_options* options, kse_report** out) {
  if (kse_status s = require(model && out, "model and out must be non-NULL"))
    return s;
  kse_analyze_options defaults;
  kse_analyze_options_init(&defaults);
  const kse_analyze_options* opt = options ? options : &defaults;
  return wrap([&] {
    auto report = std::make_unique<kse_report>();
    report->reports = kse::analyze_model(model->graph, opt->k_neighbors,
                                         opt->alpha, opt->workers);
    *out = report.release();
  });
}

kse_status kse_report_save(const kse_report* report, const char* path) {
  if (kse_status s = require(report && path, "report and path must be non-NULL"))
    return s;
  return wrap([&] { kse::save_reports(report->reports, path); });
}

kse_status kse_report_load(const char* path, kse_report** out) {
  if (kse_status s = require(path && out, "path and out must be non-NULL"))
    return s;
  return wrap([&] {
    auto report = std::make_unique<kse_report>();
    report->reports = kse::load_reports(path);
    *out = report.release();
  });
}

void kse_report_free(kse_report* report) { delete report; }

void kse_compress_options_init(kse_compress_options* options) {
  if (!options) return;
  kse::CompressionConfig defaults;
  options->granularity = defaults.granularity;
  options->shift = defaults.shift;
  options->k_neighbors = defaults.k_neighbors;
  options->alpha = defaults.alpha;
  options->seed = defaults.kmeans_seed;
  options->kmeans_max_iters = defaults.kmeans_max_iters;
  options->kmeans_tol = defaults.kmeans_tol;
  options->workers = defaults.workers;
}

kse_status kse_compress(const kse_model* model, const kse_report* report,
                        const kse_compress_options* options, kse_model** out) {
  if (kse_status s = require(model && out, "model and out must be non-NULL"))
    return s;
  kse_compress_options defaults;
  kse_compress_options_init(&defaults);
  const kse_compress_options* opt = options ? options : &defaults;
  return wrap([&] {
    kse::CompressionConfig cfg;
    cfg.granularity = opt->granularity;
    cfg.shift = opt->shift;
    cfg.k_neighbors = opt->k_neighbors;
    cfg.alpha = opt->alpha;
    cfg.kmeans_seed = opt->seed;
    cfg.kmeans_max_iters = opt->kmeans_max_iters;
    cfg.kmeans_tol = opt->kmeans_tol;
    cfg.workers = opt->workers;
    std::vector<kse::KseReport> reports =
        report ? report->reports
               : kse::analyze_model(model->graph, cfg.k_neighbors, cfg.alpha,
                                    cfg.workers);
    auto compressed = std::make_unique<kse_model>();
    compressed->graph = kse::compress_model(model->graph, reports, cfg);
    *out = compressed.release();
  });
}

kse_status kse_evaluate(const kse_model* model, const kse_dataset* dataset,
                        int workers, double* accuracy) {
  if (kse_status s = require(model && dataset && accuracy,
                             "model, dataset and accuracy must be non-NULL"))
    return s;
  return wrap([&] {
    *accuracy = kse::evaluate_accuracy(model->graph, dataset->data, workers);
  });
}

kse_status kse_agreement(const kse_model* model_a, const kse_model* model_b,
                         const kse_dataset* dataset, int workers,
                         double* top1_agreement, double* max_relative_diff) {
  if (kse_status s = require(model_a && model_b && dataset,
                             "models and dataset must be non-NULL"))
    return s;
  return wrap([&] {
    const kse::Dataset& ds = dataset->data;
    ds.validate();
    if (ds.size() == 0)
      kse::fail(kse::errc::invalid_argument, "dataset is empty");
    std::size_t agree = 0;
    double max_rel = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      kse::FeatureStack ya = kse::forward(model_a->graph, ds.images[i], workers);
      kse::FeatureStack yb = kse::forward(model_b->graph, ds.images[i], workers);
      if (ya.size() != yb.size())
        kse::fail(kse::errc::shape, "models produce different output sizes");
      std::size_t best_a = 0, best_b = 0;
      for (std::size_t j = 0; j < ya.size(); ++j) {
        double a = ya.data()[j], b = yb.data()[j];
        double rel = std::abs(a - b) /
                     std::max({1.0, std::abs(a), std::abs(b)});
        max_rel = std::max(max_rel, rel);
        if (a > ya.data()[best_a]) best_a = j;
        if (b > yb.data()[best_b]) best_b = j;
      }
      if (best_a == best_b) ++agree;
    }
    if (top1_agreement)
      *top1_agreement = static_cast<double>(agree) / static_cast<double>(ds.size());
    if (max_relative_diff) *max_relative_diff = max_rel;
  });
}

kse_status kse_ratio_report_text(const kse_model* dense,
                                 const kse_model* compressed, char** text_out) {
  if (kse_status s = require(dense && compressed && text_out,
                             "models and text_out must be non-NULL"))
    return s;
  return wrap([&] {
    kse::RatioReport report = kse::model_report(
        dense->graph, compressed->graph, dense->graph.input_shape);
    *text_out = dup_string(kse::render_report_text(report));
  });
}

kse_status kse_ratio_report_json(const kse_model* dense,
                                 const kse_model* compressed, char** json_out) {
  if (kse_status s = require(dense && compressed && json_out,
                             "models and json_out must be non-NULL"))
    return s;
  return wrap([&] {
    kse::RatioReport report = kse::model_report(
        dense->graph, compressed->graph, dense->graph.input_shape);
    *json_out = dup_string(kse::render_report_json(report));
  });
}

void kse_string_free(char* s) { delete[] s; }

void kse_finetune_options_init(kse_finetune_options* options) {
  if (!options) return;
  kse::TrainConfig defaults;
  options->learning_rate = defaults.learning_rate;
  options->momentum = defaults.momentum;
  options->epochs = defaults.epochs;
  options->batch_size = defaults.batch_size;
  options->seed = defaults.seed;
  options->weight_decay = defaults.weight_decay;
  options->update_exempt = defaults.update_exempt ? 1 : 0;
  options->workers = defaults.workers;
}

kse_status kse_finetune(kse_model* model, const kse_dataset* dataset,
                        const kse_finetune_options* options,
                        double* loss_trace) {
  if (kse_status s = require(model && dataset,
                             "model and dataset must be non-NULL"))
    return s;
  kse_finetune_options defaults;
  kse_finetune_options_init(&defaults);
  const kse_finetune_options* opt = options ? options : &defaults;
  return wrap([&] {
    kse::TrainConfig cfg;
    cfg.learning_rate = opt->learning_rate;
    cfg.momentum = opt->momentum;
    cfg.epochs = opt->epochs;
    cfg.batch_size = opt->batch_size;
    cfg.seed = opt->seed;
    cfg.weight_decay = opt->weight_decay;
    cfg.update_exempt = opt->update_exempt != 0;
    cfg.workers = opt->workers;
    std::vector<double> trace;
    if (cfg.update_exempt)
      trace = kse::train(model->graph, dataset->data, cfg);
    else
      trace = kse::finetune(model->graph, dataset->data, cfg);
    if (loss_trace)
      for (std::size_t i = 0; i < trace.size(); ++i) loss_trace[i] = trace[i];
  });
}

kse_status kse_correlation_study(const kse_model* model,
                                 const kse_dataset* dataset, int layer_index,
                                 double quantile, int workers,
                                 double* rho_sparsity, double* rho_richness) {
  if (kse_status s = require(model && dataset,
                             "model and dataset must be non-NULL"))
    return s;
  return wrap([&] {
    kse::CorrelationStudy study = kse::correlation_study(
        model->graph, dataset->data, layer_index, quantile, 5, workers);
    if (rho_sparsity) *rho_sparsity = study.rho_sparsity;
    if (rho_richness) *rho_richness = study.rho_richness;
  });
}

}  // extern "C"
