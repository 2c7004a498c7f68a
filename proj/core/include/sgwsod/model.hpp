#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sgwsod/dataset.hpp"
#include "sgwsod/matrix.hpp"
#include "sgwsod/seeds.hpp"

namespace sgwsod {

struct ModelConfig {
  int feature_dim = 16;
  std::vector<int> trunk_widths{128, 128};
  int saliency_hidden = 32;
  int num_classes = 4;
  double epsilon = 1e-8;
  double lambda1 = 0.1;   // seed classification
  double lambda2 = 1.0;   // seed saliency
  double lambda3 = 5e-4;  // L2 on weights
  // When false the saliency branch is bypassed (P = 1) and receives no gradient.
  bool saliency_weighting = true;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Throws ValidationError on widths < 1, negative lambdas or epsilon outside (0, 1e-3).
void validate_model_config(const ModelConfig& config);

// Fully connected layer, weight is out x in.
struct Dense {
  Matrix<double> weight;
  std::vector<double> bias;

  friend bool operator==(const Dense&, const Dense&) = default;
};

// Every learnable tensor of the network. Also used for gradients and
// momentum buffers, which share the layout.
struct NetworkTensors {
  std::vector<Dense> trunk;
  Dense saliency_hidden;
  Dense saliency_out;  // 1 x saliency_hidden
  Dense cls_stream;    // C x H
  Dense det_stream;    // C x H

  friend bool operator==(const NetworkTensors&, const NetworkTensors&) = default;
};

struct TensorView {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<double> data;
  bool is_weight = false;      // biases are excluded from L2
  bool saliency_branch = false;
};

struct ConstTensorView {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<const double> data;
  bool is_weight = false;
  bool saliency_branch = false;
};

// Declaration order: trunk layers, saliency hidden, saliency out, cls, det;
// weight before bias within a layer.
std::vector<TensorView> tensors(NetworkTensors& t);
std::vector<ConstTensorView> tensors(const NetworkTensors& t);

NetworkTensors zeros_like(const ModelConfig& config);

struct ModelParams {
  ModelConfig config;
  NetworkTensors values;
  NetworkTensors momentum;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases and momentum zero.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// Cached activations of one forward pass. Per-proposal quantities are rows
// (N x width); stream outputs are C x N.
struct ForwardTrace {
  Matrix<double> input;
  std::vector<Matrix<double>> trunk_pre;
  std::vector<Matrix<double>> trunk_act;
  Matrix<double> saliency_pre;
  Matrix<double> saliency_act;
  std::vector<double> saliency_logit;
  std::vector<double> saliency;  // P, in (0, 1); 1 when bypassed
  Matrix<double> weighted;       // P_i * h_i
  Matrix<double> cls_logits;
  Matrix<double> det_logits;
  Matrix<double> cls_softmax;    // columns sum to 1
  Matrix<double> det_softmax;    // rows sum to 1
  Matrix<double> scores;         // elementwise product
  std::vector<double> image_scores;

  std::size_t num_proposals() const { return input.rows(); }
  const Matrix<double>& hidden() const { return trunk_act.back(); }
};

Matrix<double> to_double(const Matrix<float>& m);

// Throws ValidationError on shape mismatch and NumericError naming the layer
// on a non-finite activation.
ForwardTrace forward(const ModelParams& params, const Matrix<double>& features);

// Each loss returns its value and the gradient with respect to its direct input.
struct ScoreLoss {
  double value = 0.0;
  Matrix<double> grad;  // C x N, w.r.t. the score matrix
};
struct SaliencyLoss {
  double value = 0.0;
  std::vector<double> grad;  // N, w.r.t. P
};
struct ImageLoss {
  double value = 0.0;
  std::vector<double> grad;  // C, w.r.t. image scores
};

ScoreLoss loss_seed_classification(const ForwardTrace& trace, const SeedAssignment& assignment,
                                   double epsilon);
SaliencyLoss loss_seed_saliency(const ForwardTrace& trace, const SeedAssignment& assignment);
ImageLoss loss_image_classification(const ForwardTrace& trace, const LabelVector& labels,
                                    double epsilon);

// Sum of squared weights (biases excluded; saliency branch excluded when bypassed).
double l2_penalty(const ModelParams& params);

struct LossBreakdown {
  double l_ic = 0.0;
  double l_sc = 0.0;
  double l_ss = 0.0;
  double l_reg = 0.0;
  double total = 0.0;
};

// total = l_ic + lambda1 * l_sc + (lambda2 / 2) * l_ss + (lambda3 / 2) * l_reg
double combine(const ModelConfig& config, double l_ic, double l_sc, double l_ss, double l_reg);

// Upstream gradients already weighted by the lambdas.
struct LossGrads {
  Matrix<double> d_scores;  // C x N
  std::vector<double> d_image_scores;
  std::vector<double> d_saliency;
};

// Reverse pass. Adds lambda3 * W to every weight gradient.
NetworkTensors backward(const ModelParams& params, const ForwardTrace& trace, const LossGrads& grads);

struct Objective {
  LossBreakdown loss;
  NetworkTensors grads;
  ForwardTrace trace;
};

// Loss values only; used by finite-difference checks.
LossBreakdown objective_value(const ModelParams& params, const Matrix<double>& features,
                              const LabelVector& labels, const SeedAssignment& assignment);

// Forward, all three losses, backward.
Objective objective(const ModelParams& params, const Matrix<double>& features,
                    const LabelVector& labels, const SeedAssignment& assignment);

}  // namespace sgwsod
