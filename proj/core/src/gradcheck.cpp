#include "sgwsod/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "sgwsod/rng.hpp"

namespace sgwsod {

GradCheckProblem make_gradcheck_problem(const GradCheckCase& spec) {
  ModelConfig cfg;
  cfg.num_classes = spec.num_classes;
  cfg.feature_dim = spec.feature_dim;
  cfg.trunk_widths = {7, 6};
  cfg.saliency_hidden = 5;
  cfg.saliency_weighting = spec.saliency_weighting;

  Rng rng(spec.seed * 0x2545f4914f6cdd1dull + 17);
  GradCheckProblem p{init_params(cfg, rng.next()), {}, {}, {}};
  // Non-zero biases so that every path is exercised.
  for (auto& view : tensors(p.params.values)) {
    if (!view.is_weight) {
      for (auto& v : view.data) v = rng.uniform(-0.3, 0.3);
    }
  }

  const auto n = static_cast<std::size_t>(spec.num_proposals);
  p.features = Matrix<double>(n, static_cast<std::size_t>(spec.feature_dim));
  for (auto& v : p.features.flat()) v = rng.normal();

  p.labels.y.assign(static_cast<std::size_t>(spec.num_classes), -1);
  for (auto& y : p.labels.y) y = rng.below(2) ? 1 : -1;
  if (p.labels.positives().empty()) p.labels.y[rng.below(p.labels.y.size())] = 1;

  std::vector<char> used(n, 0);
  for (int c : p.labels.positives()) {
    const int seed_index = static_cast<int>(rng.below(n));
    used[static_cast<std::size_t>(seed_index)] = 1;
    p.assignment.seeds.push_back({c, seed_index, {}});
  }
  for (std::size_t k = 0; k < p.assignment.seeds.size(); ++k) {
    std::vector<int> free;
    for (std::size_t i = 0; i < n; ++i) {
      if (!used[i]) free.push_back(static_cast<int>(i));
    }
    if (free.empty()) break;
    const int neg = free[rng.below(free.size())];
    used[static_cast<std::size_t>(neg)] = 1;
    p.assignment.negatives.push_back(neg);
  }
  for (const auto& s : p.assignment.seeds) {
    p.assignment.sample_indices.push_back(s.seed_index);
    p.assignment.targets.push_back(1.0);
  }
  for (int neg : p.assignment.negatives) {
    p.assignment.sample_indices.push_back(neg);
    p.assignment.targets.push_back(0.0);
  }
  return p;
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport check_gradients(const GradCheckCase& spec, double step) {
  GradCheckProblem prob = make_gradcheck_problem(spec);
  const Objective analytic = objective(prob.params, prob.features, prob.labels, prob.assignment);
  const auto grad_views = tensors(analytic.grads);

  GradCheckReport report;
  report.spec = spec;
  auto views = tensors(prob.params.values);
  for (std::size_t k = 0; k < views.size(); ++k) {
    TensorError err{views[k].name, 0.0};
    for (std::size_t j = 0; j < views[k].data.size(); ++j) {
      double& w = views[k].data[j];
      const double saved = w;
      w = saved + step;
      const double up = objective_value(prob.params, prob.features, prob.labels, prob.assignment).total;
      w = saved - step;
      const double down = objective_value(prob.params, prob.features, prob.labels, prob.assignment).total;
      w = saved;
      const double numeric = (up - down) / (2.0 * step);
      err.max_relative_error =
          std::max(err.max_relative_error, relative_error(grad_views[k].data[j], numeric));
      ++report.entries_checked;
    }
    report.max_relative_error = std::max(report.max_relative_error, err.max_relative_error);
    report.tensors.push_back(err);
  }
  return report;
}

std::vector<GradCheckCase> gradcheck_suite(std::uint64_t seed, int count) {
  const int classes[] = {2, 5};
  const int proposals[] = {1, 3, 8};
  const int dims[] = {4, 16};
  std::vector<GradCheckCase> out;
  for (int k = 0; k < count; ++k) {
    GradCheckCase c;
    c.num_classes = classes[k % 2];
    c.num_proposals = proposals[(k / 2) % 3];
    c.feature_dim = dims[(k / 6) % 2];
    c.saliency_weighting = k % 7 != 6;
    c.seed = seed * 1000 + static_cast<std::uint64_t>(k);
    out.push_back(c);
  }
  return out;
}

}  // namespace sgwsod
