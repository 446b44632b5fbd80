//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Generates the bundled toy fixture: a trained dense classifier plus train
// and eval splits of the synthetic quadrant task.
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "kse/dataset.hpp"
#include "kse/error.hpp"
#include "kse/finetune.hpp"
#include "kse/model_io.hpp"
#include "toy/toy_fixture.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Toy fixture generator: model + datasets for the quadrant task"};
  std::string out_dir;
  std::uint64_t seed = 0x746f79ULL;
  int epochs = 40;
  int per_class = 60;
  double lr = 0.05;
  double weight_decay = 1e-3;
  app.add_option("--out", out_dir, "Output directory")->required();
  app.add_option("--seed", seed, "RNG seed")->capture_default_str();
  app.add_option("--epochs", epochs, "Baseline training epochs")
      ->capture_default_str();
  app.add_option("--per-class", per_class, "Images per class and split")
      ->capture_default_str();
  app.add_option("--lr", lr, "Baseline learning rate")->capture_default_str();
  app.add_option("--weight-decay", weight_decay, "Baseline weight decay")
      ->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    toy::FixtureConfig cfg;
    cfg.per_class = per_class;
    cfg.seed = seed;
    kse::Dataset train_split = toy::make_dataset(cfg, 1);
    kse::Dataset eval_split = toy::make_dataset(cfg, 2);

    kse::ModelGraph model = toy::make_model(seed);
    std::vector<double> trace =
        toy::train_baseline(model, train_split, epochs, lr, weight_decay, seed);

    double acc = kse::evaluate_accuracy(model, eval_split, 0);
    std::cout << "baseline loss " << trace.front() << " -> " << trace.back()
              << ", eval accuracy " << acc << "\n";

    std::filesystem::create_directories(out_dir);
    kse::save_model(model, out_dir + "/toy_dense");
    kse::save_dataset(train_split, out_dir + "/train");
    kse::save_dataset(eval_split, out_dir + "/eval");
    std::cout << "wrote " << out_dir << "/toy_dense.manifest.json, train/, eval/\n";
  } catch (const kse::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 9;
  }
  return 0;
}
