#include "sgwsod/experiment.hpp"

#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sgwsod {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "SGWSOD";
    case Variant::kNoSaliency: return "SGWSOD-SAL";
    case Variant::kNoSaliencyNoSeed: return "SGWSOD-SAL-SC";
  }
  return "?";
}

TrainConfig apply_variant(TrainConfig config, Variant v) {
  config.disable_saliency_subnet = v != Variant::kFull;
  config.disable_seed_losses = v == Variant::kNoSaliencyNoSeed;
  return config;
}

Benchmark standard_benchmark(std::uint64_t seed) {
  Benchmark b;
  b.train_data.num_images = 50;
  b.train_data.num_classes = 4;
  b.train_data.saliency_noise = 0.2;
  b.train_data.feature_snr = 4.0;
  b.train_data.seed = 2 * seed + 1000;
  b.test_data = b.train_data;
  b.test_data.seed = 2 * seed + 1001;

  b.model.feature_dim = b.train_data.feature_dim;
  b.model.num_classes = b.train_data.num_classes;
  b.model.trunk_widths = {32, 32};
  b.model.saliency_hidden = 32;

  // Desk-scale schedule: same shape as the default (20 epochs, 10x drop at
  // epoch 10) with step sizes sized for a randomly initialized small net.
  b.train.lr_phase1 = 2e-3;
  b.train.lr_phase2 = 2e-4;
  b.train.init_seed = seed;
  b.train.shuffle_seed = seed + 77;
  return b;
}

RunResult run_benchmark(const Benchmark& bench, Variant variant, std::uint64_t seed) {
  const Dataset train = generate_synthetic(bench.train_data);
  const Dataset test = generate_synthetic(bench.test_data);
  const TrainConfig tc = apply_variant(bench.train, variant);
  TrainResult trained = sgwsod::train(train.records, bench.model, tc);
  RunResult r;
  r.variant = variant;
  r.seed = seed;
  r.report = evaluate(trained.params, test.records, train.records, train.manifest.class_names);
  r.epochs = std::move(trained.log.epochs);
  return r;
}

namespace {

constexpr Variant kAllVariants[] = {Variant::kFull, Variant::kNoSaliency, Variant::kNoSaliencyNoSeed};

void summarize(AblationRow& row) {
  double corloc = 0.0, ap = 0.0, cls = 0.0;
  for (const auto& r : row.runs) {
    corloc += r.report.mean_corloc.value_or(0.0);
    ap += r.report.mean_ap.value_or(0.0);
    cls += r.report.mean_classification_ap.value_or(0.0);
  }
  const double n = row.runs.empty() ? 1.0 : static_cast<double>(row.runs.size());
  row.mean_corloc = corloc / n;
  row.mean_ap = ap / n;
  row.mean_classification_ap = cls / n;
}

}  // namespace

std::vector<AblationRow> run_ablation(const std::vector<std::uint64_t>& seeds) {
  std::vector<AblationRow> rows;
  for (Variant v : kAllVariants) {
    AblationRow row;
    row.variant = v;
    for (std::uint64_t s : seeds) row.runs.push_back(run_benchmark(standard_benchmark(s), v, s));
    summarize(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<AblationRow> run_ablation(const Dataset& train, const Dataset& test, const ModelConfig& model,
                                      const TrainConfig& train_config) {
  std::vector<AblationRow> rows;
  for (Variant v : kAllVariants) {
    TrainResult trained = sgwsod::train(train.records, model, apply_variant(train_config, v));
    RunResult r;
    r.variant = v;
    r.seed = train_config.init_seed;
    r.report = evaluate(trained.params, test.records, train.records, train.manifest.class_names);
    r.epochs = std::move(trained.log.epochs);
    AblationRow row;
    row.variant = v;
    row.runs.push_back(std::move(r));
    summarize(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %10s %10s %14s %6s\n", "Method", "CorLoc", "Det. AP", "Cls. AP", "runs");
  os << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-16s %10.1f %10.1f %14.1f %6zu\n", variant_name(r.variant).c_str(),
                  100.0 * r.mean_corloc, 100.0 * r.mean_ap, 100.0 * r.mean_classification_ap, r.runs.size());
    os << line;
  }
  return os.str();
}

std::string ablation_json(const std::vector<AblationRow>& rows) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["command"] = "ablate";
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    row["method"] = variant_name(r.variant);
    row["mean_corloc"] = r.mean_corloc;
    row["mean_ap"] = r.mean_ap;
    row["mean_classification_ap"] = r.mean_classification_ap;
    auto runs = nlohmann::ordered_json::array();
    for (const auto& run : r.runs) {
      runs.push_back({{"seed", run.seed},
                      {"corloc", run.report.mean_corloc.value_or(0.0)},
                      {"ap", run.report.mean_ap.value_or(0.0)},
                      {"classification_ap", run.report.mean_classification_ap.value_or(0.0)}});
    }
    row["runs"] = runs;
    arr.push_back(row);
  }
  j["rows"] = arr;
  return j.dump(2);
}

}  // namespace sgwsod
