#include "glore/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace glore {

Tensor::Tensor(int r, int c, double fill)
    : rows(r), cols(c), v(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {
  if (r < 0 || c < 0) throw Error("tensor shape must be non-negative");
}

Tensor Tensor::row_vector(const std::vector<double>& xs) {
  Tensor t(1, static_cast<int>(xs.size()));
  t.v = xs;
  return t;
}

Tensor Tensor::col_vector(const std::vector<double>& xs) {
  Tensor t(static_cast<int>(xs.size()), 1);
  t.v = xs;
  return t;
}

bool Tensor::all_finite() const {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Tensor uniform_init(int r, int c, int fan_in, Rng& rng) {
  if (fan_in <= 0) throw Error("uniform_init: fan_in must be positive");
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(r, c);
  for (double& x : t.v) x = rng.uniform(-bound, bound);
  return t;
}

std::vector<double> softmax(const std::vector<double>& x) {
  if (x.empty()) throw Error("softmax: empty input");
  double mx = *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size());
  double sum = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - mx);
    sum += out[i];
  }
  for (double& p : out) {
    p /= sum;
    // keep entries strictly positive even when exp underflows
    if (p < std::numeric_limits<double>::min()) p = std::numeric_limits<double>::min();
  }
  return out;
}

double cross_entropy(const std::vector<double>& target, const std::vector<double>& predicted) {
  if (target.size() != predicted.size()) throw Error("cross_entropy: length mismatch");
  double loss = 0.0;
  for (size_t i = 0; i < target.size(); ++i) {
    if (target[i] != 0.0) loss -= target[i] * std::log(predicted[i]);
  }
  return loss;
}

double vdot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error("vdot: length mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double vnorm(const std::vector<double>& a) { return std::sqrt(vdot(a, a)); }

}  // namespace glore
