#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ulu/data.hpp"
#include "ulu/models.hpp"

namespace ulu {

// The optimizer recipe: SGD, momentum 0.9, weight decay 5e-5, linear
// warmup over the first 10% of steps.
struct TrainConfig {
  ModelConfig model;
  int64_t epochs = 10;
  int64_t batch_size = 64;
  double base_lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-5;
  uint64_t seed = 0;
  // Keeps beta pairs at their initial values; AULU with frozen betas is
  // exactly ULU(beta^2, beta^2).
  bool freeze_betas = false;
};

struct EpochRow {
  int64_t epoch = 0;  // 0 is the pre-training evaluation
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
};

struct BetaRow {
  int64_t epoch = 0;
  int site = 0;
  double beta1_sq = 0.0;
  double beta2_sq = 0.0;
  double lib = 0.0;  // |beta1_sq - beta2_sq|
};

struct RunRecord {
  std::vector<EpochRow> epochs;  // epoch 0 plus one row per training epoch
  std::vector<BetaRow> betas;    // adaptive runs only
  double final_test_acc = 0.0;
  double wall_seconds = 0.0;
  bool diverged = false;
  TrainConfig config;
};

// Deterministic given (cfg, data). Non-finite loss or gradients mark the
// record diverged and stop training instead of crashing.
RunRecord train(const TrainConfig& cfg, const Dataset& ds_train, const Dataset& ds_test);

// Mean loss and argmax-accuracy over the full dataset. Argmax ties break
// toward the lowest class index. Rejects empty datasets.
std::pair<double, double> evaluate(Model& model, const Dataset& ds);

struct LibReport {
  std::vector<BetaRow> sites;  // epoch field unused (set to -1)
  double aggregate = 0.0;      // mean over sites
};

// Per-site |beta1^2 - beta2^2| and the mean over sites. Rejects stores
// with no adaptive sites.
LibReport lib_of(const ParamStore& params);

// Artifacts. Floats are printed with 9 significant digits.
void write_curves_csv(const RunRecord& rec, const std::string& path);
void write_betas_csv(const RunRecord& rec, const std::string& path);
void write_run_json(const RunRecord& rec, const std::string& path);
nlohmann::json train_config_json(const TrainConfig& cfg);

}  // namespace ulu
