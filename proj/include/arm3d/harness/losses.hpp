#pragma once

#include <span>
#include <vector>

#include "arm3d/core.hpp"

namespace arm3d::harness {

struct BceResult {
  Scalar value = 0;
  /// Number of unmasked items M.
  Index count = 0;
  /// d value / d logit per item (zero for masked items).
  Eigen::VectorXd grad;
  bool empty() const { return count == 0; }
};

/// -(1/M) sum_unmasked [ w1 y log p + w0 (1-y) log(1-p) ], p = sigmoid(logit),
/// evaluated through log-sigmoid so large logits stay finite. An empty
/// `mask` means every item counts. M == 0 yields value 0 and empty() true.
BceResult loss_weighted_bce(std::span<const Scalar> logits, std::span<const int> labels,
                            std::span<const bool> mask, Scalar w0, Scalar w1);

Scalar log_sigmoid(Scalar x);

/// Smooth-L1 (Huber with transition at beta), summed over elements.
Scalar smooth_l1(Scalar x, Scalar beta);
Scalar smooth_l1_grad(Scalar x, Scalar beta);

struct LossWeights {
  Scalar vote = 1.0;
  Scalar objectness = 0.5;
  Scalar box = 1.0;
  Scalar classification = 0.1;
  Scalar relation = 0.1;
};

struct LossParts {
  Scalar vote_analogue = 0;
  Scalar objectness = 0;
  Scalar box = 0;
  Scalar classification = 0;
  Scalar relation = 0;
};

struct LossBreakdown {
  Scalar vote_analogue = 0;
  Scalar objectness = 0;
  Scalar box = 0;
  Scalar classification = 0;
  Scalar relation = 0;
  Scalar total = 0;
};

/// total = l1*vote + l2*obj + l3*box + l4*cls + l5*rel, summed left to right.
/// Throws DivergenceError when any part is non-finite.
LossBreakdown loss_total(const LossParts& parts, const LossWeights& weights);

}  // namespace arm3d::harness
