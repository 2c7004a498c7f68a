#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgwsod/eval.hpp"
#include "sgwsod/synth.hpp"
#include "sgwsod/trainer.hpp"

namespace sgwsod {

// The three configurations compared in the component ablation.
enum class Variant {
  kFull,             // seed losses + saliency sub-network
  kNoSaliency,       // saliency sub-network and its loss removed
  kNoSaliencyNoSeed  // image-level loss only (two-stream baseline)
};

std::string variant_name(Variant v);
TrainConfig apply_variant(TrainConfig config, Variant v);

// The in-repo desk-scale benchmark: 50 training and 50 test images, 4
// classes, saliency noise 0.2, feature SNR 4.
struct Benchmark {
  SynthConfig train_data;
  SynthConfig test_data;
  ModelConfig model;
  TrainConfig train;
};

Benchmark standard_benchmark(std::uint64_t seed);

struct RunResult {
  Variant variant = Variant::kFull;
  std::uint64_t seed = 0;
  EvalReport report;  // detection/classification AP on test, CorLoc on train
  std::vector<EpochLog> epochs;
};

RunResult run_benchmark(const Benchmark& bench, Variant variant, std::uint64_t seed);

struct AblationRow {
  Variant variant = Variant::kFull;
  std::vector<RunResult> runs;
  double mean_corloc = 0.0;
  double mean_ap = 0.0;
  double mean_classification_ap = 0.0;
};

// Every variant on datasets generated from each seed.
std::vector<AblationRow> run_ablation(const std::vector<std::uint64_t>& seeds);

// Variants on caller-provided data (one seed).
std::vector<AblationRow> run_ablation(const Dataset& train, const Dataset& test, const ModelConfig& model,
                                      const TrainConfig& train_config);

std::string ablation_table(const std::vector<AblationRow>& rows);
std::string ablation_json(const std::vector<AblationRow>& rows);

}  // namespace sgwsod
