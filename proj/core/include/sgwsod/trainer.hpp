#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sgwsod/io.hpp"
#include "sgwsod/model.hpp"
#include "sgwsod/seeds.hpp"

namespace sgwsod {

struct TrainConfig {
  int epochs = 20;
  double lr_phase1 = 1e-5;
  double lr_phase2 = 1e-6;
  int phase_boundary = 10;  // last epoch (1-based) at lr_phase1
  double momentum = 0.9;
  double lambda1 = 0.1;
  double lambda2 = 1.0;
  double lambda3 = 5e-4;
  double sigma = kDefaultSigma;
  std::uint64_t init_seed = 1;
  std::uint64_t shuffle_seed = 1;
  bool disable_seed_losses = false;      // lambda1 = lambda2 = 0
  bool disable_saliency_subnet = false;  // lambda2 = 0, P = 1
  double feature_jitter = 0.0;           // std of additive Gaussian feature noise; 0 = off
};

void validate_train_config(const TrainConfig& config);

// Learning rate for a 1-based epoch.
double learning_rate(const TrainConfig& config, int epoch);

// Applies the lambdas and ablation flags of the train config to a model config.
ModelConfig effective_model_config(ModelConfig model, const TrainConfig& train);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  LossBreakdown mean;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::string checkpoint_path;
};

// JSON line for one epoch (no trailing newline).
std::string to_json_line(const EpochLog& entry);

using AssignmentMap = std::map<std::string, SeedAssignment>;

// Seeds depend only on saliency maps and proposals, so they are computed once.
AssignmentMap precompute_assignments(const std::vector<ImageRecord>& records, double sigma);

// v <- momentum * v + grad; w <- w - lr * v. Throws NumericError before
// touching params if any gradient entry is non-finite.
void sgd_step(ModelParams& params, const NetworkTensors& grads, double lr, double momentum);

struct TrainResult {
  ModelParams params;
  TrainLog log;
};

struct TrainOptions {
  std::optional<std::filesystem::path> checkpoint;  // written on completion or divergence
  std::ostream* log_stream = nullptr;               // receives one JSON line per epoch
};

// Throws ValidationError on an empty dataset and NumericError on divergence,
// after restoring (and, if requested, writing) the last epoch-end parameters.
TrainResult train(const std::vector<ImageRecord>& records, const ModelConfig& model_config,
                  const TrainConfig& train_config, const TrainOptions& options = {});

}  // namespace sgwsod
