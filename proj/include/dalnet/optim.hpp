#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dalnet/tensor.hpp"

namespace dalnet {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

// One bias-corrected Adam update of `param` in place; increments state.step.
void adam_step(std::span<double> param, std::span<const double> grad, AdamState& state, const AdamConfig& cfg);

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg);

  // Updates every parameter that holds a gradient; grads are left intact.
  void step();
  void zero_grad();

  const AdamConfig& config() const { return cfg_; }
  std::int64_t timestep() const { return timestep_; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamState> states_;
  AdamConfig cfg_;
  std::int64_t timestep_ = 0;
};

}  // namespace dalnet
