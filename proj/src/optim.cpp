#include "glore/optim.hpp"

#include <cmath>

namespace glore {

double adam_lrate(const AdamConfig& cfg, long long step) {
  if (cfg.schedule_dim <= 0) return cfg.base_lr;
  if (step <= 0) throw Error("adam_lrate: step must be positive");
  double s = static_cast<double>(step);
  double w = static_cast<double>(cfg.warmup_steps);
  double sched = std::min(1.0 / std::sqrt(s), s / (w * std::sqrt(w)));
  return cfg.base_lr * sched / std::sqrt(static_cast<double>(cfg.schedule_dim));
}

void adam_step(Tensor& param, const Tensor& grad, AdamState& state) {
  if (!param.same_shape(grad) || !param.same_shape(state.m)) {
    throw Error("adam_step: shape mismatch");
  }
  state.step += 1;
  double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
  double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  double lr = adam_lrate(state.cfg, state.step);
  for (size_t i = 0; i < param.v.size(); ++i) {
    double g = grad.v[i];
    state.m.v[i] = b1 * state.m.v[i] + (1.0 - b1) * g;
    state.v.v[i] = b2 * state.v.v[i] + (1.0 - b2) * g * g;
    double mhat = state.m.v[i] / bc1;
    double vhat = state.v.v[i] / bc2;
    param.v[i] -= lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
  }
}

void AdamOptimizer::step(ParamMap& params, const ParamMap& grads) {
  for (auto& [name, param] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) throw Error("AdamOptimizer: missing gradient for " + name);
    auto sit = states.find(name);
    if (sit == states.end()) {
      sit = states.emplace(name, AdamState(cfg, param.rows, param.cols)).first;
    }
    adam_step(param, git->second, sit->second);
  }
}

}  // namespace glore
