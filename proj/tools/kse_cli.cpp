//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Talks to the toolkit exclusively through the C
// API, so it doubles as a smoke test of the shared library surface.
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kse/kse.h"

namespace {

int fail_with(kse_status status, const std::string& context) {
  std::cerr << "error (" << kse_status_name(status) << "): " << context
            << ": " << kse_last_error() << "\n";
  return static_cast<int>(status);
}

struct ModelHandle {
  kse_model* p = nullptr;
  ~ModelHandle() { kse_model_free(p); }
};
struct ReportHandle {
  kse_report* p = nullptr;
  ~ReportHandle() { kse_report_free(p); }
};
struct DatasetHandle {
  kse_dataset* p = nullptr;
  ~DatasetHandle() { kse_dataset_free(p); }
};

int cmd_analyze(const std::string& model_path, const std::string& out_path,
                const kse_analyze_options& options) {
  ModelHandle model;
  if (kse_status s = kse_model_load(model_path.c_str(), &model.p))
    return fail_with(s, "loading " + model_path);
  ReportHandle report;
  if (kse_status s = kse_analyze(model.p, &options, &report.p))
    return fail_with(s, "analyzing " + model_path);
  if (kse_status s = kse_report_save(report.p, out_path.c_str()))
    return fail_with(s, "writing " + out_path);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_compress(const std::string& model_path, const std::string& report_path,
                 const std::string& out_path,
                 const kse_compress_options& options) {
  ModelHandle model;
  if (kse_status s = kse_model_load(model_path.c_str(), &model.p))
    return fail_with(s, "loading " + model_path);
  ReportHandle report;
  if (!report_path.empty())
    if (kse_status s = kse_report_load(report_path.c_str(), &report.p))
      return fail_with(s, "loading " + report_path);
  ModelHandle compressed;
  if (kse_status s = kse_compress(model.p, report.p, &options, &compressed.p))
    return fail_with(s, "compressing " + model_path);
  if (kse_status s = kse_model_save(compressed.p, out_path.c_str()))
    return fail_with(s, "writing " + out_path);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& baseline_path,
             const std::string& data_dir, int study_layer, double quantile,
             int workers) {
  ModelHandle model;
  if (kse_status s = kse_model_load(model_path.c_str(), &model.p))
    return fail_with(s, "loading " + model_path);
  DatasetHandle data;
  if (kse_status s = kse_dataset_load(data_dir.c_str(), &data.p))
    return fail_with(s, "loading " + data_dir);

  double accuracy = 0.0;
  if (kse_status s = kse_evaluate(model.p, data.p, workers, &accuracy))
    return fail_with(s, "evaluating " + model_path);
  std::printf("accuracy %.4f over %d examples\n", accuracy,
              kse_dataset_size(data.p));

  if (!baseline_path.empty()) {
    ModelHandle baseline;
    if (kse_status s = kse_model_load(baseline_path.c_str(), &baseline.p))
      return fail_with(s, "loading " + baseline_path);
    double base_acc = 0.0;
    if (kse_status s = kse_evaluate(baseline.p, data.p, workers, &base_acc))
      return fail_with(s, "evaluating " + baseline_path);
    double agreement = 0.0, max_rel = 0.0;
    if (kse_status s = kse_agreement(baseline.p, model.p, data.p, workers,
                                     &agreement, &max_rel))
      return fail_with(s, "comparing models");
    std::printf("baseline accuracy %.4f\n", base_acc);
    std::printf("top-1 agreement %.4f, max relative output diff %.3e\n",
                agreement, max_rel);
  }

  if (study_layer >= 0) {
    double rho_sparsity = 0.0, rho_richness = 0.0;
    if (kse_status s =
            kse_correlation_study(model.p, data.p, study_layer, quantile,
                                  workers, &rho_sparsity, &rho_richness))
      return fail_with(s, "correlation study");
    std::printf("layer %d: rho_sparsity %.4f, rho_richness %.4f\n",
                study_layer, rho_sparsity, rho_richness);
  }
  return 0;
}

int cmd_finetune(const std::string& model_path, const std::string& data_dir,
                 const std::string& out_path,
                 const kse_finetune_options& options) {
  ModelHandle model;
  if (kse_status s = kse_model_load(model_path.c_str(), &model.p))
    return fail_with(s, "loading " + model_path);
  DatasetHandle data;
  if (kse_status s = kse_dataset_load(data_dir.c_str(), &data.p))
    return fail_with(s, "loading " + data_dir);
  std::vector<double> trace(static_cast<std::size_t>(options.epochs), 0.0);
  if (kse_status s = kse_finetune(model.p, data.p, &options, trace.data()))
    return fail_with(s, "fine-tuning " + model_path);
  for (std::size_t e = 0; e < trace.size(); ++e)
    std::printf("epoch %zu loss %.6f\n", e + 1, trace[e]);
  if (kse_status s = kse_model_save(model.p, out_path.c_str()))
    return fail_with(s, "writing " + out_path);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_report(const std::string& dense_path, const std::string& comp_path,
               bool as_json) {
  ModelHandle dense;
  if (kse_status s = kse_model_load(dense_path.c_str(), &dense.p))
    return fail_with(s, "loading " + dense_path);
  ModelHandle compressed;
  if (kse_status s = kse_model_load(comp_path.c_str(), &compressed.p))
    return fail_with(s, "loading " + comp_path);
  char* text = nullptr;
  kse_status s = as_json ? kse_ratio_report_json(dense.p, compressed.p, &text)
                         : kse_ratio_report_text(dense.p, compressed.p, &text);
  if (s) return fail_with(s, "building report");
  std::cout << text;
  kse_string_free(text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KSE compression toolkit"};
  app.require_subcommand(1);

  kse_analyze_options analyze_options;
  kse_analyze_options_init(&analyze_options);
  kse_compress_options compress_options;
  kse_compress_options_init(&compress_options);
  kse_finetune_options finetune_options;
  kse_finetune_options_init(&finetune_options);

  std::string model_path, report_path, out_path, data_dir, baseline_path;
  int study_layer = -1;
  double quantile = 0.005;
  int workers = 0;
  bool as_json = false;

  CLI::App* analyze =
      app.add_subcommand("analyze", "Score channel importance, write a report");
  analyze->add_option("--model", model_path, "Model manifest path")->required();
  analyze->add_option("--out", out_path, "Report output path (JSONL)")
      ->required();
  analyze->add_option("-k,--k-neighbors", analyze_options.k_neighbors,
                      "Nearest neighbors for kernel entropy")
      ->capture_default_str();
  analyze->add_option("--alpha", analyze_options.alpha,
                      "Entropy weight in the indicator")
      ->capture_default_str();
  analyze->add_option("--workers", analyze_options.workers,
                      "Worker threads (0 = hardware)")
      ->capture_default_str();

  CLI::App* compress =
      app.add_subcommand("compress", "Cluster kernels into a compressed model");
  compress->add_option("--model", model_path, "Dense model manifest path")
      ->required();
  compress->add_option("--report", report_path,
                       "Analysis report (omit to analyze inline)");
  compress->add_option("--out", out_path, "Compressed model output path")
      ->required();
  compress
      ->add_option("-G,--granularity", compress_options.granularity,
                   "Compression granularity G")
      ->capture_default_str();
  compress->add_option("-T,--shift", compress_options.shift, "Budget shift T")
      ->capture_default_str();
  compress
      ->add_option("-k,--k-neighbors", compress_options.k_neighbors,
                   "Nearest neighbors for kernel entropy")
      ->capture_default_str();
  compress
      ->add_option("--alpha", compress_options.alpha,
                   "Entropy weight in the indicator")
      ->capture_default_str();
  compress->add_option("--seed", compress_options.seed, "Clustering seed")
      ->capture_default_str();
  compress
      ->add_option("--workers", compress_options.workers,
                   "Worker threads (0 = hardware)")
      ->capture_default_str();

  CLI::App* eval =
      app.add_subcommand("eval", "Accuracy, agreement and the mask study");
  eval->add_option("--model", model_path, "Model manifest path")->required();
  eval->add_option("--baseline", baseline_path,
                   "Second model for agreement metrics");
  eval->add_option("--data", data_dir, "Dataset directory")->required();
  eval->add_option("--study-layer", study_layer,
                   "Run the correlation study on this layer (-1 = off)")
      ->capture_default_str();
  eval->add_option("--quantile", quantile, "Receptive-mask quantile")
      ->capture_default_str();
  eval->add_option("--workers", workers, "Worker threads (0 = hardware)")
      ->capture_default_str();

  CLI::App* finetune =
      app.add_subcommand("finetune", "Train centroids of a compressed model");
  finetune->add_option("--model", model_path, "Compressed model manifest path")
      ->required();
  finetune->add_option("--data", data_dir, "Dataset directory")->required();
  finetune->add_option("--out", out_path, "Updated model output path")
      ->required();
  finetune
      ->add_option("--lr", finetune_options.learning_rate, "Learning rate")
      ->capture_default_str();
  finetune
      ->add_option("--momentum", finetune_options.momentum, "SGD momentum")
      ->capture_default_str();
  finetune->add_option("--epochs", finetune_options.epochs, "Training epochs")
      ->capture_default_str();
  finetune
      ->add_option("--batch-size", finetune_options.batch_size,
                   "Mini-batch size")
      ->capture_default_str();
  finetune->add_option("--seed", finetune_options.seed, "Shuffle seed")
      ->capture_default_str();
  finetune
      ->add_option("--weight-decay", finetune_options.weight_decay,
                   "L2 weight decay")
      ->capture_default_str();
  finetune->add_flag("--update-exempt", "Also train dense (exempt) layers");
  finetune
      ->add_option("--workers", finetune_options.workers,
                   "Worker threads (0 = hardware)")
      ->capture_default_str();

  CLI::App* report =
      app.add_subcommand("report", "Compression and acceleration ratios");
  report->add_option("--dense", model_path, "Dense model manifest path")
      ->required();
  report->add_option("--compressed", baseline_path,
                     "Compressed model manifest path")
      ->required();
  report->add_flag("--json", as_json, "Emit JSON instead of the table");

  CLI11_PARSE(app, argc, argv);

  if (analyze->parsed()) return cmd_analyze(model_path, out_path, analyze_options);
  if (compress->parsed())
    return cmd_compress(model_path, report_path, out_path, compress_options);
  if (eval->parsed())
    return cmd_eval(model_path, baseline_path, data_dir, study_layer, quantile,
                    workers);
  if (finetune->parsed()) {
    finetune_options.update_exempt = finetune->count("--update-exempt") > 0;
    return cmd_finetune(model_path, data_dir, out_path, finetune_options);
  }
  if (report->parsed()) return cmd_report(model_path, baseline_path, as_json);
  return 0;
}
