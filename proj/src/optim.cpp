#include "ulu/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ulu {

void SgdOptimizer::step(ParamStore& store, double lr, double momentum, double weight_decay) {
  if (!initialized_) {
    velocity_.clear();
    for (size_t i = 0; i < store.size(); ++i) velocity_.emplace_back(Tensor::zeros(store.value(i).shape()));
    beta_velocity_.assign(store.adaptive.size(), AdaptiveParams{0.0, 0.0});
    initialized_ = true;
  }
  if (velocity_.size() != store.size() || beta_velocity_.size() != store.adaptive.size()) {
    throw GraphError("optimizer bound to a different parameter store");
  }

  for (size_t i = 0; i < store.size(); ++i) {
    if (!store.grad(i).all_finite()) {
      throw GraphError("non-finite gradient in '" + store.name(i) + "'");
    }
  }
  for (size_t s = 0; s < store.adaptive.size(); ++s) {
    const AdaptiveParams& p = store.adaptive[s];
    if (!std::isfinite(p.grad_beta1) || !std::isfinite(p.grad_beta2)) {
      throw GraphError("non-finite beta gradient at site " + std::to_string(s));
    }
  }

  for (size_t i = 0; i < store.size(); ++i) {
    Tensor& p = store.value(i);
    const Tensor& g = store.grad(i);
    Tensor& v = velocity_[i];
    for (int64_t e = 0; e < p.numel(); ++e) {
      v[e] = momentum * v[e] + g[e] + weight_decay * p[e];
      p[e] -= lr * v[e];
    }
  }
  if (!freeze_betas_) {
    for (size_t s = 0; s < store.adaptive.size(); ++s) {
      AdaptiveParams& p = store.adaptive[s];
      AdaptiveParams& v = beta_velocity_[s];
      v.beta1 = momentum * v.beta1 + p.grad_beta1;
      v.beta2 = momentum * v.beta2 + p.grad_beta2;
      p.beta1 -= lr * v.beta1;
      p.beta2 -= lr * v.beta2;
    }
  }
}

double lr_schedule(int64_t step, int64_t total_steps, double base_lr) {
  if (total_steps <= 0) throw std::invalid_argument("lr_schedule requires total_steps > 0");
  int64_t warmup = (total_steps + 9) / 10;
  double frac = static_cast<double>(step + 1) / static_cast<double>(warmup);
  return base_lr * std::min(1.0, frac);
}

}  // namespace ulu
