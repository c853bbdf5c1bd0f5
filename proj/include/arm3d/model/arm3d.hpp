#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "arm3d/core.hpp"
#include "arm3d/nn/mlp.hpp"
#include "arm3d/nn/param_store.hpp"
#include "arm3d/rng.hpp"

namespace arm3d::model {

using nn::ParamStore;

/// Proposal features (N x C) and their centers.
struct ProposalBatch {
  Matrix features;
  std::vector<Vector3> centers;

  Index size() const { return features.rows(); }
};

struct Arm3dConfig {
  Index channels = 128;
  Index partners = 8;
  /// Restrict partners to proposals predicted as objects (OBM). When false
  /// every proposal is a candidate partner.
  bool objectness_selection = true;
  /// Key/Query attention (ATM). When false weights are forced to 1/N_k.
  bool attention = true;
  std::string prefix = "arm3d";

  Index attention_width() const { return channels / 4; }
  Index pair_width() const { return 2 * channels; }
  void validate() const;
};

/// Partner indices, row-major N x N_k: partners[i * N_k + k] is the k-th
/// partner of proposal i.
struct PairIndices {
  Index proposal_count = 0;
  Index partners_per_proposal = 0;
  std::vector<Index> partners;
  /// Rows whose partners were drawn from all proposals because the selected
  /// set (minus the row itself) was empty.
  std::vector<bool> fallback;

  Index partner(Index i, Index k) const {
    return partners[static_cast<std::size_t>(i * partners_per_proposal + k)];
  }
  Index pair_count() const { return proposal_count * partners_per_proposal; }
  std::vector<std::pair<Index, Index>> as_pairs() const;
};

/// Draws N_k partners for every proposal among those with label 1, never the
/// proposal itself. Without replacement when enough candidates exist, with
/// replacement otherwise. If no candidate remains for a row, partners come
/// from all other proposals (and the row is flagged). A batch of one
/// proposal pairs with itself.
PairIndices select_and_match(std::span<const int> selected, Index partners, Rng& rng);

/// Row (i, k) = concat(f_i, f_i - f_j) with j = partner(i, k).
Matrix build_pair_features(const Matrix& features, const PairIndices& pairs);

struct AttentionRecord {
  Matrix weights;  // N x N_k
  Matrix logits;   // N x N_k
  PairIndices pairs;
};

struct ObjectnessResult {
  Matrix logits;  // N x 2
  std::vector<int> labels;
};

struct RelationLogits {
  Matrix semantic;  // (N * N_k) x 1
  Matrix spatial;   // (N * N_k) x 1
};

struct Arm3dOutput {
  Matrix relation_features;  // N x C
  Matrix objectness_logits;  // N x 2
  std::vector<int> predicted_labels;
  Matrix semantic_logits;
  Matrix spatial_logits;
  AttentionRecord attention;
};

/// Everything backward() needs from a train-mode forward.
struct Arm3dCache {
  nn::Tape objectness;
  nn::Tape trunk;
  nn::Tape semantic_head;
  nn::Tape spatial_head;
  nn::Tape key;
  nn::Tape query;
  nn::Tape fphi;
  Matrix pair_features;
  Matrix keys;
  Matrix queries;
  Matrix weights;
  PairIndices pairs;
};

/// Upstream gradients; an empty matrix stands for zero.
struct Arm3dGrads {
  Matrix relation_features;
  Matrix objectness_logits;
  Matrix semantic_logits;
  Matrix spatial_logits;
};

/// Predicted objectness: argmax of the two logits, ties to 0.
std::vector<int> objectness_labels(const Matrix& logits);

class Arm3dModule {
 public:
  explicit Arm3dModule(Arm3dConfig config);

  const Arm3dConfig& config() const { return config_; }

  void init_params(ParamStore& params, Rng& rng) const;

  ObjectnessResult objectness_forward(ParamStore& params, const Matrix& features, Mode mode,
                                      nn::Tape* tape = nullptr) const;

  RelationLogits relation_heads_forward(ParamStore& params, const Matrix& pair_features, Mode mode,
                                        Arm3dCache* cache = nullptr) const;

  AttentionRecord attention_forward(ParamStore& params, const Matrix& features,
                                    const Matrix& pair_features, const PairIndices& pairs,
                                    Arm3dCache* cache = nullptr) const;

  /// R_i = f_phi(sum_j w_ij * pair_ij): one f_phi evaluation per proposal.
  Matrix relation_features(ParamStore& params, const AttentionRecord& attention,
                           const Matrix& pair_features, nn::Tape* tape = nullptr) const;

  /// R_i = sum_j w_ij * f_phi(pair_ij): f_phi inside the sum. Equal to
  /// relation_features() whenever rows of w sum to 1 and f_phi is affine.
  Matrix relation_features_inside_sum(const ParamStore& params, const AttentionRecord& attention,
                                      const Matrix& pair_features) const;

  /// Full wiring. `selection_override` replaces the predicted objectness
  /// when choosing partners (teacher forcing).
  Arm3dOutput forward(ParamStore& params, const ProposalBatch& proposals, Rng& rng, Mode mode,
                      Arm3dCache* cache = nullptr,
                      std::optional<std::span<const int>> selection_override = std::nullopt) const;

  /// Same wiring with a fixed pairing.
  Arm3dOutput forward_with_pairs(ParamStore& params, const ProposalBatch& proposals,
                                 const PairIndices& pairs, Mode mode, Arm3dCache* cache = nullptr) const;

  /// Accumulates parameter gradients and returns d(loss)/d(features).
  Matrix backward(ParamStore& params, Arm3dCache& cache, const Arm3dGrads& grads) const;

  const nn::MlpSpec& objectness_spec() const { return objectness_; }
  const nn::MlpSpec& trunk_spec() const { return trunk_; }
  const nn::MlpSpec& semantic_spec() const { return semantic_; }
  const nn::MlpSpec& spatial_spec() const { return spatial_; }
  const nn::MlpSpec& key_spec() const { return key_; }
  const nn::MlpSpec& query_spec() const { return query_; }
  const nn::MlpSpec& fphi_spec() const { return fphi_; }

 private:
  Arm3dOutput forward_impl(ParamStore& params, const ProposalBatch& proposals, ObjectnessResult objectness,
                           PairIndices pairs, Mode mode, Arm3dCache* cache) const;

  Arm3dConfig config_;
  nn::MlpSpec objectness_;
  nn::MlpSpec trunk_;
  nn::MlpSpec semantic_;
  nn::MlpSpec spatial_;
  nn::MlpSpec key_;
  nn::MlpSpec query_;
  nn::MlpSpec fphi_;
};

}  // namespace arm3d::model
