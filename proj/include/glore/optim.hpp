#pragma once

#include <map>
#include <string>

#include "glore/tensor.hpp"

namespace glore {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
  double base_lr = 1.0;
  // schedule_dim > 0 enables the inverse-sqrt warmup schedule
  //   lrate(step) = base_lr * schedule_dim^-0.5 * min(step^-0.5, step * warmup^-1.5);
  // schedule_dim == 0 uses the constant base_lr.
  int warmup_steps = 400;
  int schedule_dim = 0;
};

double adam_lrate(const AdamConfig& cfg, long long step);

struct AdamState {
  AdamConfig cfg;
  long long step = 0;
  Tensor m;  // first moment
  Tensor v;  // second moment

  AdamState() = default;
  AdamState(const AdamConfig& c, int rows, int cols)
      : cfg(c), m(Tensor::zeros(rows, cols)), v(Tensor::zeros(rows, cols)) {}
};

// One bias-corrected Adam update:
//   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2
//   param -= lrate(step) * (m / (1-b1^step)) / (sqrt(v / (1-b2^step)) + eps)
void adam_step(Tensor& param, const Tensor& grad, AdamState& state);

// Per-name Adam states sharing one config; lazily initialized on first step.
struct AdamOptimizer {
  AdamConfig cfg;
  std::map<std::string, AdamState> states;

  explicit AdamOptimizer(const AdamConfig& c) : cfg(c) {}
  void step(ParamMap& params, const ParamMap& grads);
};

}  // namespace glore
