// HOSR forward pass: stacked propagation layers, attentive layer
// aggregation and SVD++-style scoring.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "hosr/data.hpp"
#include "hosr/graph.hpp"
#include "hosr/numerics.hpp"

namespace hosr {

enum class AttentionMode { kAttention, kAverage, kBase };
enum class DecayVariant { kInvSqrtItems, kInvSqrtItemsUsers };
enum class RunMode { kTrain, kEval };

struct ModelParams {
  std::size_t n = 0;  // users
  std::size_t m = 0;  // items
  std::size_t d = 0;  // embedding size
  std::size_t k = 0;  // layer count
  DenseMatrix user_emb;                   // n x d
  DenseMatrix item_emb;                   // m x d
  std::vector<DenseMatrix> layer_weight;  // k of d x d
  DenseMatrix attn_query_proj;            // d x d, projects the layer-0 query
  DenseMatrix attn_layer_proj;            // d x d, projects each layer output
  DenseMatrix attn_vector;                // 1 x d

  std::vector<DenseMatrix*> tensors() {
    std::vector<DenseMatrix*> t{&user_emb, &item_emb};
    for (auto& w : layer_weight) t.push_back(&w);
    t.push_back(&attn_query_proj);
    t.push_back(&attn_layer_proj);
    t.push_back(&attn_vector);
    return t;
  }
  std::vector<const DenseMatrix*> tensors() const {
    std::vector<const DenseMatrix*> t{&user_emb, &item_emb};
    for (const auto& w : layer_weight) t.push_back(&w);
    t.push_back(&attn_query_proj);
    t.push_back(&attn_layer_proj);
    t.push_back(&attn_vector);
    return t;
  }
  std::vector<std::string> tensor_names() const {
    std::vector<std::string> names{"user_emb", "item_emb"};
    for (std::size_t l = 0; l < layer_weight.size(); ++l)
      names.push_back("layer_weight_" + std::to_string(l + 1));
    names.insert(names.end(), {"attn_query_proj", "attn_layer_proj", "attn_vector"});
    return names;
  }
};

// Uniform init: embeddings at +-scale (default 0.01), weight matrices and
// attention parameters at the +-sqrt(6/(d+d)) glorot bound. An explicit
// scale overrides both families (scale 0 gives all-zero parameters).
inline ModelParams init_params(std::size_t n, std::size_t m, std::size_t d, std::size_t k,
                               std::uint64_t seed, std::optional<double> scale = std::nullopt) {
  if (d < 1 || k < 1) throw ConfigError("init_params: d and k must be >= 1");
  ModelParams p;
  p.n = n;
  p.m = m;
  p.d = d;
  p.k = k;
  RandomStream rng(seed);
  const double emb_scale = scale.value_or(0.01);
  const double w_scale = scale.value_or(std::sqrt(6.0 / static_cast<double>(d + d)));
  const auto fill_uniform = [&rng](DenseMatrix& t, double s) {
    for (double& v : t.data) v = rng.uniform(-s, s);
  };
  p.user_emb = DenseMatrix(n, d);
  p.item_emb = DenseMatrix(m, d);
  fill_uniform(p.user_emb, emb_scale);
  fill_uniform(p.item_emb, emb_scale);
  p.layer_weight.resize(k);
  for (auto& w : p.layer_weight) {
    w = DenseMatrix(d, d);
    fill_uniform(w, w_scale);
  }
  p.attn_query_proj = DenseMatrix(d, d);
  p.attn_layer_proj = DenseMatrix(d, d);
  p.attn_vector = DenseMatrix(1, d);
  fill_uniform(p.attn_query_proj, w_scale);
  fill_uniform(p.attn_layer_proj, w_scale);
  fill_uniform(p.attn_vector, w_scale);
  return p;
}

// Everything the backward pass needs from one forward pass.
struct ForwardTrace {
  RunMode mode = RunMode::kEval;
  AttentionMode attention = AttentionMode::kAttention;
  double p1 = 0.0;
  SparseMatrix prop;  // the L this pass propagated through

  std::vector<DenseMatrix> layer_input;  // H^(l) = L * out^(l-1), cached for dW
  std::vector<DenseMatrix> layer_act;    // tanh(H W), before dropout
  std::vector<DenseMatrix> layer_out;    // after dropout; equals layer_act in eval mode
  std::vector<std::vector<std::uint8_t>> dropout_mask;  // per layer, empty when p1 = 0

  std::vector<DenseMatrix> attn_hidden;  // z_il = u_i P_u + out_i^(l) P_o, per layer
  DenseMatrix attn_logits;               // n x k
  DenseMatrix attn_weights;              // n x k, rows sum to 1
  DenseMatrix aggregated;                // U^(a), n x d
};

// U^(l) = tanh(L U^(l-1) W^(l)) for l = 1..k. In train mode each layer
// output entry is zeroed with probability p1 and survivors are scaled by
// 1/(1-p1) (inverted dropout); eval mode applies no dropout.
inline ForwardTrace forward_layers(const ModelParams& params, const PropMatrix& prop, double p1,
                                   RandomStream& rng, RunMode mode) {
  if (prop.matrix.rows != params.n || prop.matrix.cols != params.n)
    throw ConfigError("forward_layers: propagation matrix must be n x n");
  if (p1 < 0.0 || p1 >= 1.0) throw ConfigError("forward_layers: p1 must be in [0,1)");
  ForwardTrace trace;
  trace.mode = mode;
  trace.p1 = p1;
  trace.prop = prop.matrix;
  trace.layer_input.reserve(params.k);
  trace.layer_act.reserve(params.k);
  trace.layer_out.reserve(params.k);

  const bool drop = mode == RunMode::kTrain && p1 > 0.0;
  const double keep_scale = drop ? 1.0 / (1.0 - p1) : 1.0;
  const DenseMatrix* below = &params.user_emb;
  for (std::size_t l = 0; l < params.k; ++l) {
    trace.layer_input.push_back(spmm(trace.prop, *below));
    DenseMatrix act = elementwise(Nonlinearity::kTanh,
                                  gemm(trace.layer_input.back(), params.layer_weight[l]));
    DenseMatrix out = act;
    if (drop) {
      std::vector<std::uint8_t> mask(out.data.size());
      for (std::size_t i = 0; i < out.data.size(); ++i) {
        mask[i] = rng.uniform() >= p1 ? 1 : 0;
        out.data[i] = mask[i] ? out.data[i] * keep_scale : 0.0;
      }
      trace.dropout_mask.push_back(std::move(mask));
    }
    trace.layer_act.push_back(std::move(act));
    trace.layer_out.push_back(std::move(out));
    below = &trace.layer_out.back();
  }
  return trace;
}

// Attention over layer outputs 1..k with the original embedding as query.
// With k = 1 the attention is bypassed (weights all one, U^(a) = U^(1)).
// Average mode fixes uniform weights 1/k; base mode passes U^(k) through.
inline void attention_aggregate(const ModelParams& params, ForwardTrace& trace,
                                AttentionMode mode) {
  trace.attention = mode;
  const std::size_t n = params.n, d = params.d, k = params.k;
  if (trace.layer_out.size() != k) throw ConfigError("attention_aggregate: trace/params mismatch");

  if (k == 1) {
    trace.attn_weights = DenseMatrix(n, 1, 1.0);
    trace.aggregated = trace.layer_out[0];
    return;
  }
  if (mode == AttentionMode::kBase) {
    trace.attn_weights = DenseMatrix(n, k, 0.0);
    for (std::size_t i = 0; i < n; ++i) trace.attn_weights(i, k - 1) = 1.0;
    trace.aggregated = trace.layer_out[k - 1];
    return;
  }
  if (mode == AttentionMode::kAverage) {
    trace.attn_weights = DenseMatrix(n, k, 1.0 / static_cast<double>(k));
  } else {
    const DenseMatrix query = gemm(params.user_emb, params.attn_query_proj);
    trace.attn_hidden.clear();
    trace.attn_hidden.reserve(k);
    trace.attn_logits = DenseMatrix(n, k);
    const std::span<const double> h = params.attn_vector.row(0);
    for (std::size_t l = 0; l < k; ++l) {
      DenseMatrix z = gemm(trace.layer_out[l], params.attn_layer_proj);
      for (std::size_t i = 0; i < z.data.size(); ++i) z.data[i] += query.data[i];
      for (std::size_t i = 0; i < n; ++i) {
        double logit = 0.0;
        const double* zi = z.data.data() + i * d;
        for (std::size_t c = 0; c < d; ++c)
          if (zi[c] > 0.0) logit += zi[c] * h[c];
        trace.attn_logits(i, l) = logit;
      }
      trace.attn_hidden.push_back(std::move(z));
    }
    trace.attn_weights = softmax_rows(trace.attn_logits);
  }
  trace.aggregated = DenseMatrix(n, d);
  for (std::size_t l = 0; l < k; ++l) {
    const DenseMatrix& out = trace.layer_out[l];
    for (std::size_t i = 0; i < n; ++i) {
      const double s = trace.attn_weights(i, l);
      double* agg = trace.aggregated.data.data() + i * d;
      const double* oi = out.data.data() + i * d;
      for (std::size_t c = 0; c < d; ++c) agg[c] += s * oi[c];
    }
  }
}

inline ForwardTrace forward_pass(const ModelParams& params, const PropMatrix& prop, double p1,
                                 RandomStream& rng, RunMode mode, AttentionMode attention) {
  ForwardTrace trace = forward_layers(params, prop, p1, rng, mode);
  attention_aggregate(params, trace, attention);
  return trace;
}

namespace detail {

// Decay coefficient in front of the interacted-item aggregation term.
inline double decay_coefficient(const InteractionSet& train, std::uint32_t user,
                                std::uint32_t item, DecayVariant variant) {
  const double ni = static_cast<double>(train.items_of_user[user].size());
  if (ni == 0.0) return 0.0;
  if (variant == DecayVariant::kInvSqrtItems) return 1.0 / std::sqrt(ni);
  const double aj = static_cast<double>(train.users_of_item[item].size());
  if (aj == 0.0) return 0.0;
  return 1.0 / std::sqrt(ni * aj);
}

inline std::vector<double> item_bag(const ModelParams& params, const InteractionSet& train,
                                    std::uint32_t user) {
  std::vector<double> bag(params.d, 0.0);
  for (std::uint32_t j : train.items_of_user[user]) {
    const double* vj = params.item_emb.data.data() + static_cast<std::size_t>(j) * params.d;
    for (std::size_t c = 0; c < params.d; ++c) bag[c] += vj[c];
  }
  return bag;
}

}  // namespace detail

// score(u, j) = (u^(a) + decay * sum of interacted item embeddings) . v_j,
// with the interacted set taken from training data only.
inline double predict(const ModelParams& params, const DenseMatrix& aggregated,
                      const InteractionSet& train, std::uint32_t user, std::uint32_t item,
                      DecayVariant variant = DecayVariant::kInvSqrtItems) {
  if (user >= params.n || item >= params.m) throw ConfigError("predict: id out of range");
  const std::vector<double> bag = detail::item_bag(params, train, user);
  const double c = detail::decay_coefficient(train, user, item, variant);
  const double* ua = aggregated.data.data() + static_cast<std::size_t>(user) * params.d;
  const double* vj = params.item_emb.data.data() + static_cast<std::size_t>(item) * params.d;
  double score = 0.0;
  for (std::size_t i = 0; i < params.d; ++i) score += (ua[i] + c * bag[i]) * vj[i];
  return score;
}

// Scores for every item in one pass over the item matrix.
inline std::vector<double> full_scores(const ModelParams& params, const DenseMatrix& aggregated,
                                       const InteractionSet& train, std::uint32_t user,
                                       DecayVariant variant = DecayVariant::kInvSqrtItems) {
  if (user >= params.n) throw ConfigError("full_scores: user out of range");
  const std::vector<double> bag = detail::item_bag(params, train, user);
  const double* ua = aggregated.data.data() + static_cast<std::size_t>(user) * params.d;
  std::vector<double> scores(params.m, 0.0);
  if (variant == DecayVariant::kInvSqrtItems) {
    std::vector<double> uvec(params.d);
    const double ni = static_cast<double>(train.items_of_user[user].size());
    const double c = ni > 0.0 ? 1.0 / std::sqrt(ni) : 0.0;
    for (std::size_t i = 0; i < params.d; ++i) uvec[i] = ua[i] + c * bag[i];
    for (std::size_t j = 0; j < params.m; ++j) {
      const double* vj = params.item_emb.data.data() + j * params.d;
      double s = 0.0;
      for (std::size_t i = 0; i < params.d; ++i) s += uvec[i] * vj[i];
      scores[j] = s;
    }
  } else {
    for (std::size_t j = 0; j < params.m; ++j) {
      const double c = detail::decay_coefficient(train, user, static_cast<std::uint32_t>(j), variant);
      const double* vj = params.item_emb.data.data() + j * params.d;
      double s = 0.0;
      for (std::size_t i = 0; i < params.d; ++i) s += (ua[i] + c * bag[i]) * vj[i];
      scores[j] = s;
    }
  }
  return scores;
}

}  // namespace hosr
