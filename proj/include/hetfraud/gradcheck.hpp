#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hetfraud/params.hpp"
#include "hetfraud/tape.hpp"

namespace hetfraud {

// Builds a scalar loss on the given tape from the current parameter values.
using TapeObjective = std::function<Var(Tape&, ParamStore&)>;

struct GradCheckEntry {
  std::string parameter;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  GradCheckEntry worst;
  std::size_t coordinates = 0;
  double tolerance = 0.0;
  bool passed = true;
  // Parameters with at least one coordinate above tolerance.
  std::vector<std::string> failing_parameters;
};

// |a - n| / max(1e-8, |a| + |n|)
double relative_error(double analytic, double numeric);

// Compares tape gradients against central differences
// (f(theta + h) - f(theta - h)) / 2h for every coordinate of every parameter.
// Parameter values are restored exactly afterwards.
GradCheckReport grad_check(const TapeObjective& objective, ParamStore& params, double step = 1e-5,
                           double tolerance = 1e-5);

}  // namespace hetfraud
