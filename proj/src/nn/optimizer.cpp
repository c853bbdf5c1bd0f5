#include "arm3d/nn/optimizer.hpp"

#include <cmath>

namespace arm3d::nn {

void optimizer_step(ParamStore& params, Scalar learning_rate, const OptimizerConfig& config) {
  for (const auto& [name, p] : params.entries()) {
    if (!all_finite(p.grad)) throw DivergenceError("non-finite gradient in parameter '" + name + "'");
  }
  const std::int64_t step = params.step_count() + 1;
  const Scalar correction1 = 1.0 - std::pow(config.beta1, static_cast<Scalar>(step));
  const Scalar correction2 = 1.0 - std::pow(config.beta2, static_cast<Scalar>(step));
  for (auto& [name, p] : params.entries()) {
    if (config.kind == OptimizerKind::sgd) {
      p.value -= learning_rate * p.grad;
    } else {
      p.first_moment = config.beta1 * p.first_moment + (1.0 - config.beta1) * p.grad;
      p.second_moment =
          config.beta2 * p.second_moment + (1.0 - config.beta2) * p.grad.cwiseAbs2();
      const auto m_hat = p.first_moment.array() / correction1;
      const auto v_hat = p.second_moment.array() / correction2;
      p.value.array() -= learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
    p.grad.setZero();
  }
  params.set_step_count(step);
}

Scalar scheduled_learning_rate(Scalar base_rate, int epoch, int total_epochs) {
  if (total_epochs <= 0) return base_rate;
  // integer comparisons keep the boundaries exact
  if (epoch * 5 >= total_epochs * 4) return base_rate * 0.01;
  if (epoch * 5 >= total_epochs * 3) return base_rate * 0.1;
  return base_rate;
}

}  // namespace arm3d::nn
