#include "arm3d/harness/losses.hpp"

#include <cmath>

namespace arm3d::harness {

Scalar log_sigmoid(Scalar x) {
  // log(1 / (1 + e^-x)) = -softplus(-x)
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

namespace {

Scalar sigmoid(Scalar x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

BceResult loss_weighted_bce(std::span<const Scalar> logits, std::span<const int> labels,
                            std::span<const bool> mask, Scalar w0, Scalar w1) {
  if (logits.size() != labels.size() || (!mask.empty() && mask.size() != logits.size())) {
    throw DimensionError("loss_weighted_bce: logits, labels and mask must have equal length");
  }
  BceResult r;
  r.grad = Eigen::VectorXd::Zero(static_cast<Index>(logits.size()));
  Scalar sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    ++r.count;
    const Scalar z = logits[i];
    if (labels[i] == 1) {
      sum += w1 * log_sigmoid(z);
    } else {
      sum += w0 * log_sigmoid(-z);
    }
  }
  if (r.count == 0) return r;
  const auto m = static_cast<Scalar>(r.count);
  r.value = -sum / m;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    const Scalar p = sigmoid(logits[i]);
    r.grad[static_cast<Index>(i)] = labels[i] == 1 ? -w1 * (1.0 - p) / m : w0 * p / m;
  }
  return r;
}

Scalar smooth_l1(Scalar x, Scalar beta) {
  const Scalar a = std::abs(x);
  return a < beta ? 0.5 * x * x / beta : a - 0.5 * beta;
}

Scalar smooth_l1_grad(Scalar x, Scalar beta) {
  const Scalar a = std::abs(x);
  if (a < beta) return x / beta;
  return x > 0 ? 1.0 : -1.0;
}

LossBreakdown loss_total(const LossParts& parts, const LossWeights& weights) {
  const Scalar values[] = {parts.vote_analogue, parts.objectness, parts.box, parts.classification,
                           parts.relation};
  const char* names[] = {"vote_analogue", "objectness", "box", "classification", "relation"};
  for (int i = 0; i < 5; ++i) {
    if (!std::isfinite(values[i])) throw DivergenceError(std::string("non-finite loss term: ") + names[i]);
  }
  LossBreakdown b;
  b.vote_analogue = parts.vote_analogue;
  b.objectness = parts.objectness;
  b.box = parts.box;
  b.classification = parts.classification;
  b.relation = parts.relation;
  b.total = weights.vote * b.vote_analogue;
  b.total += weights.objectness * b.objectness;
  b.total += weights.box * b.box;
  b.total += weights.classification * b.classification;
  b.total += weights.relation * b.relation;
  return b;
}

}  // namespace arm3d::harness
