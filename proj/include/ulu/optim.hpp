#pragma once

#include <cstdint>

#include "ulu/graph.hpp"

namespace ulu {

// SGD with classical momentum and decoupled-from-betas weight decay:
//   v <- momentum * v + grad + weight_decay * param
//   param <- param - lr * v
// Beta pairs follow the same recurrence but never receive weight decay
// (decay would drag both branches toward the linear 0.5x map and bias the
// beta statistics). Velocities persist across steps in this object.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(bool freeze_betas = false) : freeze_betas_(freeze_betas) {}

  // Aborts (throws GraphError) on any non-finite gradient before touching
  // parameters.
  void step(ParamStore& store, double lr, double momentum, double weight_decay);

 private:
  bool freeze_betas_ = false;
  bool initialized_ = false;
  std::vector<Tensor> velocity_;
  std::vector<AdaptiveParams> beta_velocity_;  // grad slots unused
};

// Warmup schedule: linear ramp to base_lr over the first 10% of steps
// (ceil), constant afterwards. lr(s) = base_lr * min(1, (s+1)/ceil(total/10)).
double lr_schedule(int64_t step, int64_t total_steps, double base_lr);

}  // namespace ulu
