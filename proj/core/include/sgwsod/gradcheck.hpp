#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgwsod/model.hpp"

namespace sgwsod {

inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckTolerance = 1e-5;
// Gradients smaller than this are compared in absolute rather than relative terms.
inline constexpr double kGradCheckFloor = 1e-4;

struct GradCheckCase {
  int num_classes = 3;
  int num_proposals = 4;
  int feature_dim = 5;
  bool saliency_weighting = true;
  std::uint64_t seed = 0;
};

// A random model, input and seed assignment for one case.
struct GradCheckProblem {
  ModelParams params;
  Matrix<double> features;
  LabelVector labels;
  SeedAssignment assignment;
};

GradCheckProblem make_gradcheck_problem(const GradCheckCase& spec);

struct TensorError {
  std::string name;
  double max_relative_error = 0.0;
};

struct GradCheckReport {
  GradCheckCase spec;
  std::vector<TensorError> tensors;
  double max_relative_error = 0.0;
  std::size_t entries_checked = 0;
};

// |a - n| / max(|a|, |n|, floor) between the analytic gradient of the full
// objective and central finite differences of objective_value.
double relative_error(double analytic, double numeric, double floor = kGradCheckFloor);

GradCheckReport check_gradients(const GradCheckCase& spec, double step = kGradCheckStep);

// The standard suite: `count` cases cycling C in {2,5}, N in {1,3,8}, D in {4,16}.
std::vector<GradCheckCase> gradcheck_suite(std::uint64_t seed, int count = 20);

}  // namespace sgwsod
