#include "arm3d/model/arm3d.hpp"

#include "arm3d/nn/softmax.hpp"

namespace arm3d::model {

using nn::LayerSpec;

void Arm3dConfig::validate() const {
  if (channels <= 0 || channels % 4 != 0) {
    throw DimensionError("ARM3D channel count must be a positive multiple of 4, got " +
                         std::to_string(channels));
  }
  if (partners <= 0) throw UsageError("ARM3D needs at least one partner per proposal");
}

std::vector<std::pair<Index, Index>> PairIndices::as_pairs() const {
  std::vector<std::pair<Index, Index>> out;
  out.reserve(partners.size());
  for (Index i = 0; i < proposal_count; ++i) {
    for (Index k = 0; k < partners_per_proposal; ++k) out.emplace_back(i, partner(i, k));
  }
  return out;
}

PairIndices select_and_match(std::span<const int> selected, Index partners, Rng& rng) {
  const auto n = static_cast<Index>(selected.size());
  if (n < 1) throw UsageError("select_and_match: no proposals");
  if (partners < 1) throw UsageError("select_and_match: partners must be >= 1");

  std::vector<Index> pool;
  for (Index i = 0; i < n; ++i) {
    if (selected[static_cast<std::size_t>(i)] == 1) pool.push_back(i);
  }

  PairIndices out;
  out.proposal_count = n;
  out.partners_per_proposal = partners;
  out.partners.reserve(static_cast<std::size_t>(n * partners));
  out.fallback.assign(static_cast<std::size_t>(n), false);

  std::vector<Index> candidates;
  for (Index i = 0; i < n; ++i) {
    candidates.clear();
    for (Index j : pool) {
      if (j != i) candidates.push_back(j);
    }
    if (candidates.empty()) {
      out.fallback[static_cast<std::size_t>(i)] = true;
      for (Index j = 0; j < n; ++j) {
        if (j != i) candidates.push_back(j);
      }
      if (candidates.empty()) candidates.push_back(i);
    }
    const auto m = static_cast<Index>(candidates.size());
    if (m >= partners) {
      // partial Fisher-Yates: the first `partners` slots end up a uniform sample
      for (Index k = 0; k < partners; ++k) {
        const auto r = k + static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(m - k)));
        std::swap(candidates[static_cast<std::size_t>(k)], candidates[static_cast<std::size_t>(r)]);
        out.partners.push_back(candidates[static_cast<std::size_t>(k)]);
      }
    } else {
      for (Index k = 0; k < partners; ++k) {
        out.partners.push_back(candidates[rng.uniform_index(static_cast<std::uint64_t>(m))]);
      }
    }
  }
  return out;
}

Matrix build_pair_features(const Matrix& features, const PairIndices& pairs) {
  const Index n = features.rows();
  const Index c = features.cols();
  if (pairs.proposal_count != n) throw DimensionError("pair indices do not match proposal count");
  Matrix out(pairs.pair_count(), 2 * c);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < pairs.partners_per_proposal; ++k) {
      const Index j = pairs.partner(i, k);
      if (j < 0 || j >= n) throw UsageError("pair partner index out of range");
      const Index row = i * pairs.partners_per_proposal + k;
      out.row(row).head(c) = features.row(i);
      out.row(row).tail(c) = features.row(i) - features.row(j);
    }
  }
  return out;
}

std::vector<int> objectness_labels(const Matrix& logits) {
  std::vector<int> labels(static_cast<std::size_t>(logits.rows()));
  for (Index i = 0; i < logits.rows(); ++i) {
    labels[static_cast<std::size_t>(i)] = static_cast<int>(nn::argmax_row(logits, i));
  }
  return labels;
}

Arm3dModule::Arm3dModule(Arm3dConfig config) : config_(std::move(config)) {
  config_.validate();
  const Index c = config_.channels;
  const Index cw = config_.attention_width();
  const Index cp = config_.pair_width();
  const std::string& p = config_.prefix;

  // h1, h2 are followed by batchnorm + ReLU; h3 emits the two logits
  objectness_ = {LayerSpec::linear(p + ".objectness.h1", c, c / 2, false),
                 LayerSpec::batchnorm(p + ".objectness.h1_bn", c / 2),
                 LayerSpec::relu(c / 2),
                 LayerSpec::linear(p + ".objectness.h2", c / 2, c / 4, false),
                 LayerSpec::batchnorm(p + ".objectness.h2_bn", c / 4),
                 LayerSpec::relu(c / 4),
                 LayerSpec::linear(p + ".objectness.h3", c / 4, 2, true)};
  trunk_ = {LayerSpec::linear(p + ".relation.trunk.l1", cp, c, false),
            LayerSpec::batchnorm(p + ".relation.trunk.bn1", c),
            LayerSpec::relu(c),
            LayerSpec::linear(p + ".relation.trunk.l2", c, c / 2, false),
            LayerSpec::batchnorm(p + ".relation.trunk.bn2", c / 2),
            LayerSpec::relu(c / 2)};
  semantic_ = {LayerSpec::linear(p + ".relation.semantic", c / 2, 1, true)};
  spatial_ = {LayerSpec::linear(p + ".relation.spatial", c / 2, 1, true)};
  key_ = {LayerSpec::linear(p + ".attention.key", c, cw, false), LayerSpec::tanh(cw)};
  query_ = {LayerSpec::linear(p + ".attention.query", cp, cw, false), LayerSpec::tanh(cw)};
  fphi_ = {LayerSpec::linear(p + ".fphi", cp, c, true)};
}

void Arm3dModule::init_params(ParamStore& params, Rng& rng) const {
  for (const auto* spec : {&objectness_, &trunk_, &semantic_, &spatial_, &key_, &query_, &fphi_}) {
    nn::init_mlp(params, *spec, rng);
  }
}

ObjectnessResult Arm3dModule::objectness_forward(ParamStore& params, const Matrix& features, Mode mode,
                                                 nn::Tape* tape) const {
  ObjectnessResult r;
  r.logits = nn::mlp_forward(params, objectness_, features, mode, tape);
  r.labels = objectness_labels(r.logits);
  return r;
}

RelationLogits Arm3dModule::relation_heads_forward(ParamStore& params, const Matrix& pair_features,
                                                   Mode mode, Arm3dCache* cache) const {
  const Matrix shared =
      nn::mlp_forward(params, trunk_, pair_features, mode, cache ? &cache->trunk : nullptr);
  RelationLogits r;
  r.semantic = nn::mlp_forward(params, semantic_, shared, mode, cache ? &cache->semantic_head : nullptr);
  r.spatial = nn::mlp_forward(params, spatial_, shared, mode, cache ? &cache->spatial_head : nullptr);
  return r;
}

AttentionRecord Arm3dModule::attention_forward(ParamStore& params, const Matrix& features,
                                               const Matrix& pair_features, const PairIndices& pairs,
                                               Arm3dCache* cache) const {
  const Index n = pairs.proposal_count;
  const Index nk = pairs.partners_per_proposal;
  require_shape(pair_features, n * nk, config_.pair_width(), "attention pair features");

  // Key/Query have no batchnorm, so train and eval behave the same
  const bool record = cache && config_.attention;
  const Matrix keys = nn::mlp_forward(params, key_, features, Mode::eval, record ? &cache->key : nullptr);
  const Matrix queries =
      nn::mlp_forward(params, query_, pair_features, Mode::eval, record ? &cache->query : nullptr);

  AttentionRecord rec;
  rec.pairs = pairs;
  rec.logits.resize(n, nk);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < nk; ++k) rec.logits(i, k) = queries.row(i * nk + k).dot(keys.row(i));
  }
  if (config_.attention) {
    rec.weights = nn::softmax_rows(rec.logits);
  } else {
    rec.weights = Matrix::Constant(n, nk, 1.0 / static_cast<Scalar>(nk));
  }
  if (cache) {
    cache->keys = keys;
    cache->queries = queries;
    cache->weights = rec.weights;
  }
  return rec;
}

namespace {

Matrix aggregate(const Matrix& weights, const Matrix& pair_features) {
  const Index n = weights.rows();
  const Index nk = weights.cols();
  Matrix agg = Matrix::Zero(n, pair_features.cols());
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < nk; ++k) agg.row(i) += weights(i, k) * pair_features.row(i * nk + k);
  }
  return agg;
}

}  // namespace

Matrix Arm3dModule::relation_features(ParamStore& params, const AttentionRecord& attention,
                                      const Matrix& pair_features, nn::Tape* tape) const {
  require_shape(pair_features, attention.weights.size(), config_.pair_width(), "relation pair features");
  return nn::mlp_forward(params, fphi_, aggregate(attention.weights, pair_features), Mode::train, tape);
}

Matrix Arm3dModule::relation_features_inside_sum(const ParamStore& params, const AttentionRecord& attention,
                                                 const Matrix& pair_features) const {
  const Matrix transformed = nn::mlp_forward(params, fphi_, pair_features);
  return aggregate(attention.weights, transformed);
}

Arm3dOutput Arm3dModule::forward(ParamStore& params, const ProposalBatch& proposals, Rng& rng, Mode mode,
                                 Arm3dCache* cache,
                                 std::optional<std::span<const int>> selection_override) const {
  ObjectnessResult objectness =
      objectness_forward(params, proposals.features, mode, cache ? &cache->objectness : nullptr);
  std::vector<int> selection;
  if (!config_.objectness_selection) {
    selection.assign(static_cast<std::size_t>(proposals.size()), 1);
  } else if (selection_override) {
    if (static_cast<Index>(selection_override->size()) != proposals.size()) {
      throw DimensionError("selection override length does not match proposal count");
    }
    selection.assign(selection_override->begin(), selection_override->end());
  } else {
    selection = objectness.labels;
  }
  PairIndices pairs = select_and_match(selection, config_.partners, rng);
  return forward_impl(params, proposals, std::move(objectness), std::move(pairs), mode, cache);
}

Arm3dOutput Arm3dModule::forward_with_pairs(ParamStore& params, const ProposalBatch& proposals,
                                            const PairIndices& pairs, Mode mode, Arm3dCache* cache) const {
  ObjectnessResult objectness =
      objectness_forward(params, proposals.features, mode, cache ? &cache->objectness : nullptr);
  return forward_impl(params, proposals, std::move(objectness), pairs, mode, cache);
}

Arm3dOutput Arm3dModule::forward_impl(ParamStore& params, const ProposalBatch& proposals,
                                      ObjectnessResult objectness, PairIndices pairs, Mode mode,
                                      Arm3dCache* cache) const {
  require_shape(proposals.features, proposals.size(), config_.channels, "proposal features");
  Matrix pair_features = build_pair_features(proposals.features, pairs);

  Arm3dOutput out;
  out.objectness_logits = std::move(objectness.logits);
  out.predicted_labels = std::move(objectness.labels);
  RelationLogits heads = relation_heads_forward(params, pair_features, mode, cache);
  out.semantic_logits = std::move(heads.semantic);
  out.spatial_logits = std::move(heads.spatial);
  out.attention = attention_forward(params, proposals.features, pair_features, pairs, cache);
  out.relation_features =
      relation_features(params, out.attention, pair_features, cache ? &cache->fphi : nullptr);
  if (cache) {
    cache->pair_features = std::move(pair_features);
    cache->pairs = std::move(pairs);
  }
  return out;
}

Matrix Arm3dModule::backward(ParamStore& params, Arm3dCache& cache, const Arm3dGrads& grads) const {
  const Index n = cache.pairs.proposal_count;
  const Index nk = cache.pairs.partners_per_proposal;
  const Index c = config_.channels;
  const Matrix& pf = cache.pair_features;

  Matrix d_features = Matrix::Zero(n, c);
  Matrix d_pairs = Matrix::Zero(n * nk, 2 * c);

  if (grads.objectness_logits.size() > 0) {
    d_features += nn::backward(cache.objectness, grads.objectness_logits, params);
  }

  if (grads.semantic_logits.size() > 0 || grads.spatial_logits.size() > 0) {
    Matrix d_shared = Matrix::Zero(n * nk, c / 2);
    if (grads.semantic_logits.size() > 0) {
      d_shared += nn::backward(cache.semantic_head, grads.semantic_logits, params);
    }
    if (grads.spatial_logits.size() > 0) {
      d_shared += nn::backward(cache.spatial_head, grads.spatial_logits, params);
    }
    d_pairs += nn::backward(cache.trunk, d_shared, params);
  }

  if (grads.relation_features.size() > 0) {
    const Matrix d_agg = nn::backward(cache.fphi, grads.relation_features, params);
    const Matrix& w = cache.weights;
    for (Index i = 0; i < n; ++i) {
      for (Index k = 0; k < nk; ++k) d_pairs.row(i * nk + k) += w(i, k) * d_agg.row(i);
    }
    if (config_.attention) {
      Matrix d_w(n, nk);
      for (Index i = 0; i < n; ++i) {
        for (Index k = 0; k < nk; ++k) d_w(i, k) = d_agg.row(i).dot(pf.row(i * nk + k));
      }
      const Matrix d_logits = nn::softmax_rows_backward(w, d_w);
      Matrix d_queries(n * nk, config_.attention_width());
      Matrix d_keys = Matrix::Zero(n, config_.attention_width());
      for (Index i = 0; i < n; ++i) {
        for (Index k = 0; k < nk; ++k) {
          d_queries.row(i * nk + k) = d_logits(i, k) * cache.keys.row(i);
          d_keys.row(i) += d_logits(i, k) * cache.queries.row(i * nk + k);
        }
      }
      d_pairs += nn::backward(cache.query, d_queries, params);
      d_features += nn::backward(cache.key, d_keys, params);
    }
  }

  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < nk; ++k) {
      const Index j = cache.pairs.partner(i, k);
      const auto row = d_pairs.row(i * nk + k);
      d_features.row(i) += row.head(c) + row.tail(c);
      d_features.row(j) -= row.tail(c);
    }
  }

  for (nn::Tape* t : {&cache.objectness, &cache.trunk, &cache.semantic_head, &cache.spatial_head,
                      &cache.key, &cache.query, &cache.fphi}) {
    t->clear();
  }
  return d_features;
}

}  // namespace arm3d::model
