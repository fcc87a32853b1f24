#pragma once

#include <map>
#include <string>

#include "nlos/params.hpp"

namespace nlos {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  /// Exponential schedule lr_t = lr * exp(-decay_gamma * t).
  double decay_gamma = 1e-4;
};

struct OptimState {
  AdamWConfig config;
  std::map<std::string, Tensor> m, v;
  long step = 0;

  double current_lr() const;
};

/// One AdamW step with decoupled weight decay on every trainable parameter
/// present in `grads`. Throws NumericalError naming the first parameter with a
/// non-finite gradient before anything is modified.
void optimizer_step(ModelParams& params, const std::map<std::string, Tensor>& grads,
                    OptimState& state);

}  // namespace nlos
