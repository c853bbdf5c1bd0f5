#pragma once

#include "arm3d/core.hpp"
#include "arm3d/nn/param_store.hpp"

namespace arm3d::nn {

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar epsilon = 1e-8;
};

/// Applies one update from the accumulated gradients, zeroes them and bumps
/// the step count. A non-finite gradient raises DivergenceError naming the
/// parameter before anything is modified.
void optimizer_step(ParamStore& params, Scalar learning_rate, const OptimizerConfig& config = {});

/// Step decay: base rate, x0.1 from 60% of the epochs, x0.01 from 80%.
Scalar scheduled_learning_rate(Scalar base_rate, int epoch, int total_epochs);

}  // namespace arm3d::nn
