#include "sgwsod/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "sgwsod/checkpoint.hpp"
#include "sgwsod/errors.hpp"
#include "sgwsod/log.hpp"
#include "sgwsod/rng.hpp"

namespace sgwsod {

void validate_train_config(const TrainConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("train config: ") + what);
  };
  require(c.epochs >= 1, "epochs must be >= 1");
  require(c.lr_phase1 >= 0.0 && c.lr_phase2 >= 0.0, "learning rates must be >= 0");
  require(std::isfinite(c.lr_phase1) && std::isfinite(c.lr_phase2), "learning rates must be finite");
  require(c.phase_boundary >= 0, "phase boundary must be >= 0");
  require(c.momentum >= 0.0 && c.momentum < 1.0, "momentum must be in [0, 1)");
  require(c.lambda1 >= 0.0 && c.lambda2 >= 0.0 && c.lambda3 >= 0.0, "lambdas must be >= 0");
  require(c.sigma > 0.0, "sigma must be positive");
  require(c.feature_jitter >= 0.0, "feature jitter must be >= 0");
}

double learning_rate(const TrainConfig& c, int epoch) {
  return epoch <= c.phase_boundary ? c.lr_phase1 : c.lr_phase2;
}

ModelConfig effective_model_config(ModelConfig m, const TrainConfig& t) {
  m.lambda1 = t.lambda1;
  m.lambda2 = t.lambda2;
  m.lambda3 = t.lambda3;
  if (t.disable_saliency_subnet) {
    m.lambda2 = 0.0;
    m.saliency_weighting = false;
  }
  if (t.disable_seed_losses) {
    m.lambda1 = 0.0;
    m.lambda2 = 0.0;
  }
  return m;
}

std::string to_json_line(const EpochLog& e) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["epoch"] = e.epoch;
  j["lr"] = e.lr;
  j["l_ic"] = e.mean.l_ic;
  j["l_sc"] = e.mean.l_sc;
  j["l_ss"] = e.mean.l_ss;
  j["l_reg"] = e.mean.l_reg;
  j["total"] = e.mean.total;
  j["seconds"] = e.seconds;
  return j.dump();
}

AssignmentMap precompute_assignments(const std::vector<ImageRecord>& records, double sigma) {
  AssignmentMap out;
  for (const auto& r : records) out.emplace(r.id, assign_seeds(r, sigma));
  return out;
}

void sgd_step(ModelParams& params, const NetworkTensors& grads, double lr, double momentum) {
  const auto g = tensors(grads);
  for (const auto& view : g) {
    for (double v : view.data) {
      if (!std::isfinite(v)) throw NumericError("non-finite gradient in " + view.name + "; step aborted");
    }
  }
  auto w = tensors(params.values);
  auto vel = tensors(params.momentum);
  if (w.size() != g.size()) throw ValidationError("sgd_step: gradient layout does not match parameters");
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k].data.size() != g[k].data.size()) {
      throw ValidationError("sgd_step: shape mismatch for " + w[k].name);
    }
    for (std::size_t j = 0; j < w[k].data.size(); ++j) {
      vel[k].data[j] = momentum * vel[k].data[j] + g[k].data[j];
      w[k].data[j] -= lr * vel[k].data[j];
    }
  }
}

TrainResult train(const std::vector<ImageRecord>& records, const ModelConfig& model_config,
                  const TrainConfig& tc, const TrainOptions& options) {
  validate_train_config(tc);
  if (records.empty()) throw ValidationError("train: dataset is empty");
  const ModelConfig mc = effective_model_config(model_config, tc);
  validate_model_config(mc);
  for (const auto& r : records) validate_record(r, mc.num_classes, mc.feature_dim);

  const AssignmentMap assignments = precompute_assignments(records, tc.sigma);
  std::vector<Matrix<double>> features;
  features.reserve(records.size());
  for (const auto& r : records) features.push_back(to_double(r.features));

  TrainResult result{init_params(mc, tc.init_seed), {}};
  ModelParams last_good = result.params;
  Rng order_rng(tc.shuffle_seed);
  Rng jitter_rng(tc.shuffle_seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = learning_rate(tc, epoch);
    order_rng.shuffle(std::span<std::size_t>(order));

    LossBreakdown sum;
    for (std::size_t idx : order) {
      const ImageRecord& r = records[idx];
      Matrix<double> x = features[idx];
      if (tc.feature_jitter > 0.0) {
        for (auto& v : x.flat()) v += tc.feature_jitter * jitter_rng.normal();
      }
      try {
        Objective obj = objective(result.params, x, r.labels, assignments.at(r.id));
        if (!std::isfinite(obj.loss.total)) throw NumericError("non-finite loss on image '" + r.id + "'");
        sgd_step(result.params, obj.grads, lr, tc.momentum);
        sum.l_ic += obj.loss.l_ic;
        sum.l_sc += obj.loss.l_sc;
        sum.l_ss += obj.loss.l_ss;
        sum.l_reg += obj.loss.l_reg;
        sum.total += obj.loss.total;
      } catch (const NumericError& e) {
        result.params = last_good;
        std::string where = "training diverged in epoch " + std::to_string(epoch) + ": " + e.what();
        if (options.checkpoint) {
          save_checkpoint(result.params, *options.checkpoint);
          where += "; last good parameters (end of epoch " + std::to_string(epoch - 1) + ") written to " +
                   options.checkpoint->string();
        }
        throw NumericError(where);
      }
    }
    const double count = static_cast<double>(records.size());
    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = lr;
    entry.mean = {sum.l_ic / count, sum.l_sc / count, sum.l_ss / count, sum.l_reg / count, sum.total / count};
    entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.epochs.push_back(entry);
    if (options.log_stream != nullptr) *options.log_stream << to_json_line(entry) << '\n';
    log::info("epoch ", epoch, " lr ", lr, " total ", entry.mean.total);
    last_good = result.params;
  }

  if (options.checkpoint) {
    save_checkpoint(result.params, *options.checkpoint);
    result.log.checkpoint_path = options.checkpoint->string();
  }
  return result;
}

}  // namespace sgwsod
