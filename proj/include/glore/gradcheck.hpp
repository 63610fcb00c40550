#pragma once

#include <functional>
#include <string>

#include "glore/tensor.hpp"

namespace glore {

// A differentiable scalar function of named parameters: value() at a point
// and the analytic gradient at the same point.
struct DiffFunction {
  std::function<double(const ParamMap&)> value;
  std::function<ParamMap(const ParamMap&)> gradient;
};

struct GradCheckEntry {
  std::string name;
  int index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  bool pass = false;
  double max_rel_error = 0.0;
  GradCheckEntry worst;
  long long coordinates = 0;
};

// Compares the analytic gradient against central differences
// (f(t+h) - f(t-h)) / 2h per coordinate. Relative error uses
// |a - n| / max(1, |a|, |n|). Throws on non-finite function values.
GradCheckReport gradient_check(const DiffFunction& f, const ParamMap& theta,
                               double tolerance, double step = 1e-5);

}  // namespace glore
