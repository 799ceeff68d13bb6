#include "hetfraud/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "hetfraud/error.hpp"

namespace hetfraud {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

namespace {

double evaluate(const TapeObjective& objective, ParamStore& params) {
  Tape tape;
  Var loss = objective(tape, params);
  if (loss.rows() != 1 || loss.cols() != 1) throw Error(ErrorKind::check, "objective is not scalar");
  return loss.value()(0, 0);
}

}  // namespace

GradCheckReport grad_check(const TapeObjective& objective, ParamStore& params, double step, double tolerance) {
  if (!(step > 0.0)) throw Error(ErrorKind::check, "step must be positive");

  params.zero_grad();
  double base = 0.0;
  {
    Tape tape;
    Var loss = objective(tape, params);
    base = loss.value()(0, 0);
    tape.backward(loss);
  }
  if (evaluate(objective, params) != base) {
    throw Error(ErrorKind::check, "objective is not deterministic in its parameters");
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  for (auto& p : params.params()) {
    bool failed = false;
    const DenseMatrix analytic = p.grad;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      double& theta = p.value.values()[i];
      const double saved = theta;
      theta = saved + step;
      const double up = evaluate(objective, params);
      theta = saved - step;
      const double down = evaluate(objective, params);
      theta = saved;

      GradCheckEntry e{p.name, i, analytic.values()[i], (up - down) / (2.0 * step), 0.0};
      e.relative_error = relative_error(e.analytic, e.numeric);
      ++report.coordinates;
      if (report.coordinates == 1 || e.relative_error > report.max_relative_error) {
        report.max_relative_error = e.relative_error;
        report.worst = e;
      }
      if (!(e.relative_error < tolerance)) failed = true;
    }
    if (failed) report.failing_parameters.push_back(p.name);
  }
  report.passed = report.failing_parameters.empty();
  return report;
}

}  // namespace hetfraud
