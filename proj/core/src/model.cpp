#include "sgwsod/model.hpp"

#include <algorithm>
#include <cmath>

#include "sgwsod/errors.hpp"
#include "sgwsod/rng.hpp"

namespace sgwsod {
namespace {

Dense make_dense(std::size_t out, std::size_t in) {
  return Dense{Matrix<double>(out, in), std::vector<double>(out, 0.0)};
}

// out(n, o) = sum_k in(n, k) * W(o, k) + b(o)
Matrix<double> affine(const Matrix<double>& in, const Dense& layer) {
  const std::size_t n = in.rows();
  const std::size_t outs = layer.weight.rows();
  const std::size_t ins = layer.weight.cols();
  Matrix<double> out(n, outs);
  for (std::size_t r = 0; r < n; ++r) {
    const auto x = in.row(r);
    for (std::size_t o = 0; o < outs; ++o) {
      const auto w = layer.weight.row(o);
      double acc = layer.bias[o];
      for (std::size_t k = 0; k < ins; ++k) acc += w[k] * x[k];
      out(r, o) = acc;
    }
  }
  return out;
}

Matrix<double> relu(const Matrix<double>& m) {
  Matrix<double> out = m;
  for (auto& v : out.flat()) v = v > 0.0 ? v : 0.0;
  return out;
}

void require_finite(const Matrix<double>& m, const char* layer) {
  for (double v : m.flat()) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite activation in layer '") + layer + "'");
  }
}

// Accumulates the gradient of out = in * W^T + b given d_out, and returns
// d_in = d_out * W.
Matrix<double> affine_backward(const Matrix<double>& in, const Dense& layer, const Matrix<double>& d_out,
                               Dense& grad) {
  const std::size_t n = in.rows();
  const std::size_t outs = layer.weight.rows();
  const std::size_t ins = layer.weight.cols();
  Matrix<double> d_in(n, ins);
  for (std::size_t r = 0; r < n; ++r) {
    const auto x = in.row(r);
    auto dx = d_in.row(r);
    for (std::size_t o = 0; o < outs; ++o) {
      const double g = d_out(r, o);
      if (g == 0.0) continue;
      grad.bias[o] += g;
      auto gw = grad.weight.row(o);
      const auto w = layer.weight.row(o);
      for (std::size_t k = 0; k < ins; ++k) {
        gw[k] += g * x[k];
        dx[k] += g * w[k];
      }
    }
  }
  return d_in;
}

void relu_backward(const Matrix<double>& pre, Matrix<double>& d) {
  auto dv = d.flat();
  const auto pv = pre.flat();
  for (std::size_t k = 0; k < dv.size(); ++k) {
    if (!(pv[k] > 0.0)) dv[k] = 0.0;
  }
}

template <typename View, typename Tensors>
std::vector<View> collect(Tensors& t) {
  std::vector<View> out;
  auto add = [&](const std::string& name, auto& layer, bool saliency) {
    out.push_back({name + ".weight", {layer.weight.rows(), layer.weight.cols()}, layer.weight.flat(), true,
                   saliency});
    out.push_back({name + ".bias", {layer.bias.size()}, std::span(layer.bias), false, saliency});
  };
  for (std::size_t l = 0; l < t.trunk.size(); ++l) add("trunk." + std::to_string(l), t.trunk[l], false);
  add("saliency.hidden", t.saliency_hidden, true);
  add("saliency.out", t.saliency_out, true);
  add("stream.cls", t.cls_stream, false);
  add("stream.det", t.det_stream, false);
  return out;
}

}  // namespace

void validate_model_config(const ModelConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("model config: ") + what);
  };
  require(c.feature_dim >= 1, "feature_dim must be >= 1");
  require(c.num_classes >= 1, "num_classes must be >= 1");
  require(!c.trunk_widths.empty(), "need at least one trunk layer");
  for (int w : c.trunk_widths) require(w >= 1, "trunk widths must be >= 1");
  require(c.saliency_hidden >= 1, "saliency_hidden must be >= 1");
  require(c.epsilon > 0.0 && c.epsilon < 1e-3, "epsilon must be in (0, 1e-3)");
  require(c.lambda1 >= 0.0 && c.lambda2 >= 0.0 && c.lambda3 >= 0.0, "lambdas must be >= 0");
}

std::vector<TensorView> tensors(NetworkTensors& t) { return collect<TensorView>(t); }
std::vector<ConstTensorView> tensors(const NetworkTensors& t) { return collect<ConstTensorView>(t); }

NetworkTensors zeros_like(const ModelConfig& c) {
  NetworkTensors t;
  std::size_t in = static_cast<std::size_t>(c.feature_dim);
  for (int w : c.trunk_widths) {
    t.trunk.push_back(make_dense(static_cast<std::size_t>(w), in));
    in = static_cast<std::size_t>(w);
  }
  const std::size_t hidden = in;
  const auto classes = static_cast<std::size_t>(c.num_classes);
  t.saliency_hidden = make_dense(static_cast<std::size_t>(c.saliency_hidden), hidden);
  t.saliency_out = make_dense(1, static_cast<std::size_t>(c.saliency_hidden));
  t.cls_stream = make_dense(classes, hidden);
  t.det_stream = make_dense(classes, hidden);
  return t;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  validate_model_config(config);
  ModelParams p{config, zeros_like(config), zeros_like(config)};
  Rng rng(seed);
  for (auto& view : tensors(p.values)) {
    if (!view.is_weight) continue;
    const double scale = 1.0 / std::sqrt(static_cast<double>(view.shape[1]));
    for (auto& v : view.data) v = rng.uniform(-scale, scale);
  }
  return p;
}

Matrix<double> to_double(const Matrix<float>& m) {
  Matrix<double> out(m.rows(), m.cols());
  for (std::size_t k = 0; k < m.size(); ++k) out.flat()[k] = m.flat()[k];
  return out;
}

ForwardTrace forward(const ModelParams& params, const Matrix<double>& features) {
  const ModelConfig& cfg = params.config;
  if (features.rows() == 0) throw ValidationError("forward: need at least one proposal");
  if (features.cols() != static_cast<std::size_t>(cfg.feature_dim)) {
    throw ValidationError("forward: feature width " + std::to_string(features.cols()) +
                          " does not match feature_dim " + std::to_string(cfg.feature_dim));
  }
  require_finite(features, "input");

  ForwardTrace t;
  t.input = features;
  const Matrix<double>* x = &t.input;
  for (std::size_t l = 0; l < params.values.trunk.size(); ++l) {
    t.trunk_pre.push_back(affine(*x, params.values.trunk[l]));
    require_finite(t.trunk_pre.back(), "trunk");
    t.trunk_act.push_back(relu(t.trunk_pre.back()));
    x = &t.trunk_act.back();
  }
  const Matrix<double>& h = t.hidden();
  const std::size_t n = h.rows();
  const std::size_t width = h.cols();
  const auto classes = static_cast<std::size_t>(cfg.num_classes);

  t.saliency.assign(n, 1.0);
  t.saliency_logit.assign(n, 0.0);
  if (cfg.saliency_weighting) {
    t.saliency_pre = affine(h, params.values.saliency_hidden);
    require_finite(t.saliency_pre, "saliency.hidden");
    t.saliency_act = relu(t.saliency_pre);
    const Matrix<double> logit = affine(t.saliency_act, params.values.saliency_out);
    require_finite(logit, "saliency.out");
    for (std::size_t i = 0; i < n; ++i) {
      t.saliency_logit[i] = logit(i, 0);
      t.saliency[i] = 1.0 / (1.0 + std::exp(-logit(i, 0)));
    }
  }

  t.weighted = Matrix<double>(n, width);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < width; ++k) t.weighted(i, k) = t.saliency[i] * h(i, k);
  }

  // Streams computed per proposal, then transposed to C x N.
  const Matrix<double> u = affine(t.weighted, params.values.cls_stream);
  const Matrix<double> v = affine(t.weighted, params.values.det_stream);
  require_finite(u, "stream.cls");
  require_finite(v, "stream.det");
  t.cls_logits = Matrix<double>(classes, n);
  t.det_logits = Matrix<double>(classes, n);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      t.cls_logits(c, i) = u(i, c);
      t.det_logits(c, i) = v(i, c);
    }
  }

  t.cls_softmax = Matrix<double>(classes, n);
  for (std::size_t i = 0; i < n; ++i) {
    double peak = t.cls_logits(0, i);
    for (std::size_t c = 1; c < classes; ++c) peak = std::max(peak, t.cls_logits(c, i));
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += t.cls_softmax(c, i) = std::exp(t.cls_logits(c, i) - peak);
    for (std::size_t c = 0; c < classes; ++c) t.cls_softmax(c, i) /= z;
  }
  t.det_softmax = Matrix<double>(classes, n);
  for (std::size_t c = 0; c < classes; ++c) {
    double peak = t.det_logits(c, 0);
    for (std::size_t i = 1; i < n; ++i) peak = std::max(peak, t.det_logits(c, i));
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) z += t.det_softmax(c, i) = std::exp(t.det_logits(c, i) - peak);
    for (std::size_t i = 0; i < n; ++i) t.det_softmax(c, i) /= z;
  }

  t.scores = Matrix<double>(classes, n);
  t.image_scores.assign(classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      const double s = t.cls_softmax(c, i) * t.det_softmax(c, i);
      t.scores(c, i) = s;
      t.image_scores[c] += s;
    }
    if (!(t.image_scores[c] >= 0.0 && t.image_scores[c] <= 1.0 + 1e-9)) {
      throw NumericError("image score out of [0, 1] for class " + std::to_string(c));
    }
    // The exact sum is at most 1; drop rounding excess.
    t.image_scores[c] = std::min(t.image_scores[c], 1.0);
  }
  return t;
}

ScoreLoss loss_seed_classification(const ForwardTrace& t, const SeedAssignment& a, double epsilon) {
  ScoreLoss out;
  out.grad = Matrix<double>(t.scores.rows(), t.scores.cols());
  for (const auto& s : a.seeds) {
    const auto c = static_cast<std::size_t>(s.class_id);
    const auto i = static_cast<std::size_t>(s.seed_index);
    if (c >= t.scores.rows() || i >= t.scores.cols()) throw ValidationError("seed index out of range");
    const double phi = t.scores(c, i);
    if (phi > epsilon) {
      out.value -= std::log(phi);
      out.grad(c, i) -= 1.0 / phi;
    } else {
      out.value -= std::log(epsilon);
    }
  }
  return out;
}

SaliencyLoss loss_seed_saliency(const ForwardTrace& t, const SeedAssignment& a) {
  SaliencyLoss out;
  out.grad.assign(t.saliency.size(), 0.0);
  for (std::size_t k = 0; k < a.sample_indices.size(); ++k) {
    const auto i = static_cast<std::size_t>(a.sample_indices[k]);
    if (i >= t.saliency.size()) throw ValidationError("saliency sample index out of range");
    const double r = t.saliency[i] - a.targets[k];
    out.value += r * r;
    out.grad[i] += 2.0 * r;
  }
  return out;
}

ImageLoss loss_image_classification(const ForwardTrace& t, const LabelVector& labels, double epsilon) {
  const std::size_t classes = t.image_scores.size();
  if (labels.num_classes() != classes) throw ValidationError("label vector length does not match classes");
  ImageLoss out;
  out.grad.assign(classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    const double y = labels.y[c];
    const double arg = y * (t.image_scores[c] - 0.5) + 0.5;
    if (arg > epsilon) {
      const double clamped = std::min(arg, 1.0);
      out.value -= std::log(clamped);
      out.grad[c] = -y / clamped;
    } else {
      out.value -= std::log(epsilon);
    }
  }
  return out;
}

double l2_penalty(const ModelParams& p) {
  double sum = 0.0;
  for (const auto& view : tensors(p.values)) {
    if (!view.is_weight) continue;
    if (view.saliency_branch && !p.config.saliency_weighting) continue;
    for (double v : view.data) sum += v * v;
  }
  return sum;
}

double combine(const ModelConfig& c, double l_ic, double l_sc, double l_ss, double l_reg) {
  return l_ic + c.lambda1 * l_sc + (c.lambda2 / 2.0) * l_ss + (c.lambda3 / 2.0) * l_reg;
}

NetworkTensors backward(const ModelParams& params, const ForwardTrace& t, const LossGrads& g) {
  const ModelConfig& cfg = params.config;
  const NetworkTensors& w = params.values;
  const std::size_t n = t.num_proposals();
  const auto classes = static_cast<std::size_t>(cfg.num_classes);
  if (g.d_scores.rows() != classes || g.d_scores.cols() != n || g.d_image_scores.size() != classes ||
      g.d_saliency.size() != n || t.scores.cols() != n) {
    throw ValidationError("backward: gradient shapes do not match the forward trace");
  }

  NetworkTensors grad = zeros_like(cfg);

  // Score matrix: image scores are row sums.
  Matrix<double> d_phi = g.d_scores;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < n; ++i) d_phi(c, i) += g.d_image_scores[c];
  }

  // Elementwise product, then the two softmax Jacobians.
  Matrix<double> d_u(n, classes);  // per proposal, like the affine output
  Matrix<double> d_v(n, classes);
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (std::size_t c = 0; c < classes; ++c) dot += t.cls_softmax(c, i) * d_phi(c, i) * t.det_softmax(c, i);
    for (std::size_t c = 0; c < classes; ++c) {
      d_u(i, c) = t.cls_softmax(c, i) * (d_phi(c, i) * t.det_softmax(c, i) - dot);
    }
  }
  for (std::size_t c = 0; c < classes; ++c) {
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += t.det_softmax(c, i) * d_phi(c, i) * t.cls_softmax(c, i);
    for (std::size_t i = 0; i < n; ++i) {
      d_v(i, c) = t.det_softmax(c, i) * (d_phi(c, i) * t.cls_softmax(c, i) - dot);
    }
  }

  Matrix<double> d_weighted = affine_backward(t.weighted, w.cls_stream, d_u, grad.cls_stream);
  const Matrix<double> d_weighted_det = affine_backward(t.weighted, w.det_stream, d_v, grad.det_stream);
  for (std::size_t k = 0; k < d_weighted.size(); ++k) d_weighted.flat()[k] += d_weighted_det.flat()[k];

  // Weighting g_i = P_i * h_i feeds both the trunk and the saliency branch.
  const Matrix<double>& h = t.hidden();
  Matrix<double> d_h(n, h.cols());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < h.cols(); ++k) d_h(i, k) = t.saliency[i] * d_weighted(i, k);
  }
  if (cfg.saliency_weighting) {
    Matrix<double> d_logit(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      double d_p = g.d_saliency[i];
      for (std::size_t k = 0; k < h.cols(); ++k) d_p += h(i, k) * d_weighted(i, k);
      const double p = t.saliency[i];
      d_logit(i, 0) = d_p * p * (1.0 - p);
    }
    Matrix<double> d_sal_act = affine_backward(t.saliency_act, w.saliency_out, d_logit, grad.saliency_out);
    relu_backward(t.saliency_pre, d_sal_act);
    const Matrix<double> d_h_sal = affine_backward(h, w.saliency_hidden, d_sal_act, grad.saliency_hidden);
    for (std::size_t k = 0; k < d_h.size(); ++k) d_h.flat()[k] += d_h_sal.flat()[k];
  }

  Matrix<double> d = std::move(d_h);
  for (std::size_t l = w.trunk.size(); l-- > 0;) {
    relu_backward(t.trunk_pre[l], d);
    const Matrix<double>& in = l == 0 ? t.input : t.trunk_act[l - 1];
    d = affine_backward(in, w.trunk[l], d, grad.trunk[l]);
  }

  auto grad_views = tensors(grad);
  const auto value_views = tensors(w);
  for (std::size_t k = 0; k < grad_views.size(); ++k) {
    if (!grad_views[k].is_weight) continue;
    if (grad_views[k].saliency_branch && !cfg.saliency_weighting) continue;
    for (std::size_t j = 0; j < grad_views[k].data.size(); ++j) {
      grad_views[k].data[j] += cfg.lambda3 * value_views[k].data[j];
    }
  }
  return grad;
}

namespace {

struct Parts {
  ForwardTrace trace;
  ScoreLoss sc;
  SaliencyLoss ss;
  ImageLoss ic;
  LossBreakdown loss;
};

Parts evaluate(const ModelParams& params, const Matrix<double>& features, const LabelVector& labels,
               const SeedAssignment& assignment) {
  Parts p;
  p.trace = forward(params, features);
  const double eps = params.config.epsilon;
  p.ic = loss_image_classification(p.trace, labels, eps);
  p.sc = loss_seed_classification(p.trace, assignment, eps);
  p.ss = loss_seed_saliency(p.trace, assignment);
  p.loss.l_ic = p.ic.value;
  p.loss.l_sc = p.sc.value;
  p.loss.l_ss = p.ss.value;
  p.loss.l_reg = l2_penalty(params);
  p.loss.total = combine(params.config, p.loss.l_ic, p.loss.l_sc, p.loss.l_ss, p.loss.l_reg);
  return p;
}

}  // namespace

LossBreakdown objective_value(const ModelParams& params, const Matrix<double>& features,
                              const LabelVector& labels, const SeedAssignment& assignment) {
  return evaluate(params, features, labels, assignment).loss;
}

Objective objective(const ModelParams& params, const Matrix<double>& features, const LabelVector& labels,
                    const SeedAssignment& assignment) {
  Parts p = evaluate(params, features, labels, assignment);
  const ModelConfig& cfg = params.config;
  LossGrads g;
  g.d_scores = std::move(p.sc.grad);
  for (auto& v : g.d_scores.flat()) v *= cfg.lambda1;
  g.d_image_scores = std::move(p.ic.grad);
  g.d_saliency = std::move(p.ss.grad);
  if (!cfg.saliency_weighting) std::fill(g.d_saliency.begin(), g.d_saliency.end(), 0.0);
  for (auto& v : g.d_saliency) v *= cfg.lambda2 / 2.0;

  Objective out;
  out.loss = p.loss;
  out.grads = backward(params, p.trace, g);
  out.trace = std::move(p.trace);
  return out;
}

}  // namespace sgwsod
