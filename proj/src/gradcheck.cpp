#include "glore/gradcheck.hpp"

#include <cmath>

namespace glore {

GradCheckReport gradient_check(const DiffFunction& f, const ParamMap& theta,
                               double tolerance, double step) {
  GradCheckReport report;
  ParamMap analytic = f.gradient(theta);
  ParamMap work = theta;
  for (auto& [name, tensor] : work) {
    auto ait = analytic.find(name);
    if (ait == analytic.end()) throw Error("gradient_check: no analytic gradient for " + name);
    if (!ait->second.same_shape(tensor)) {
      throw Error("gradient_check: gradient shape mismatch for " + name);
    }
    for (size_t i = 0; i < tensor.v.size(); ++i) {
      double saved = tensor.v[i];
      tensor.v[i] = saved + step;
      double up = f.value(work);
      tensor.v[i] = saved - step;
      double down = f.value(work);
      tensor.v[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw Error("gradient_check: non-finite function value at " + name);
      }
      double numeric = (up - down) / (2.0 * step);
      double a = ait->second.v[i];
      double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
      double rel = std::fabs(a - numeric) / denom;
      ++report.coordinates;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = {name, static_cast<int>(i), a, numeric, rel};
      }
    }
  }
  report.pass = report.max_rel_error < tolerance;
  return report;
}

}  // namespace glore
