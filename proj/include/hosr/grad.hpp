// Analytic backpropagation through scoring, attention and the propagation
// stack, with an independent central-difference verifier.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hosr/model.hpp"

namespace hosr {

struct Triple {
  std::uint32_t user;
  std::uint32_t pos;
  std::uint32_t neg;
};

struct Gradients {
  DenseMatrix user_emb;
  DenseMatrix item_emb;
  std::vector<DenseMatrix> layer_weight;
  DenseMatrix attn_query_proj;
  DenseMatrix attn_layer_proj;
  DenseMatrix attn_vector;

  static Gradients zeros_like(const ModelParams& p) {
    Gradients g;
    g.user_emb = DenseMatrix(p.n, p.d);
    g.item_emb = DenseMatrix(p.m, p.d);
    g.layer_weight.assign(p.k, DenseMatrix(p.d, p.d));
    g.attn_query_proj = DenseMatrix(p.d, p.d);
    g.attn_layer_proj = DenseMatrix(p.d, p.d);
    g.attn_vector = DenseMatrix(1, p.d);
    return g;
  }

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

  bool all_finite() const {
    for (const DenseMatrix* t : tensors())
      if (!t->all_finite()) return false;
    return true;
  }
};

// Attention parameters only train when the attention branch is active.
inline std::vector<bool> trainable_mask(std::size_t k, AttentionMode mode) {
  std::vector<bool> mask(2 + k, true);
  const bool attn = mode == AttentionMode::kAttention && k >= 2;
  mask.insert(mask.end(), {attn, attn, attn});
  return mask;
}

inline double l2_norm_squared(const ModelParams& params, AttentionMode mode) {
  const auto tensors = params.tensors();
  const auto mask = trainable_mask(params.k, mode);
  double total = 0.0;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    if (!mask[t]) continue;
    for (double v : tensors[t]->data) total += v * v;
  }
  return total;
}

namespace detail {

inline void scored_pair(const ModelParams& params, const DenseMatrix& aggregated,
                        const InteractionSet& train, const Triple& t, DecayVariant variant,
                        const std::vector<double>& bag, double& y_pos, double& y_neg,
                        double& c_pos, double& c_neg) {
  const std::size_t d = params.d;
  c_pos = decay_coefficient(train, t.user, t.pos, variant);
  c_neg = decay_coefficient(train, t.user, t.neg, variant);
  const double* ua = aggregated.data.data() + static_cast<std::size_t>(t.user) * d;
  const double* vp = params.item_emb.data.data() + static_cast<std::size_t>(t.pos) * d;
  const double* vn = params.item_emb.data.data() + static_cast<std::size_t>(t.neg) * d;
  y_pos = 0.0;
  y_neg = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    y_pos += (ua[i] + c_pos * bag[i]) * vp[i];
    y_neg += (ua[i] + c_neg * bag[i]) * vn[i];
  }
}

}  // namespace detail

struct BackwardResult {
  double loss = 0.0;
  Gradients grads;
};

// Exact gradients of the batch BPR loss plus L2 term, chained through the
// prediction, the attention aggregation and all propagation layers. The
// dropout masks recorded in the trace are reused, so gradients flow only
// through surviving units. L is treated as a constant.
inline BackwardResult backward(const ModelParams& params, const ForwardTrace& trace,
                               const InteractionSet& train, std::span<const Triple> batch,
                               double lambda,
                               DecayVariant variant = DecayVariant::kInvSqrtItems) {
  const std::size_t n = params.n, d = params.d, k = params.k;
  if (trace.layer_out.size() != k || trace.aggregated.rows != n)
    throw ConfigError("backward: trace does not match params");
  if (train.n_users != n || train.n_items != params.m)
    throw ConfigError("backward: interaction set does not match params");

  BackwardResult result;
  result.grads = Gradients::zeros_like(params);
  Gradients& g = result.grads;
  const AttentionMode mode = trace.attention;

  DenseMatrix d_agg(n, d);       // dL/dU^(a)
  DenseMatrix bag_grad(n, d);    // dL/d(sum of interacted item embeddings)
  std::vector<std::uint8_t> touched(n, 0);

  for (const Triple& t : batch) {
    if (t.user >= n || t.pos >= params.m || t.neg >= params.m)
      throw ConfigError("backward: triple id out of range");
    const std::vector<double> bag = detail::item_bag(params, train, t.user);
    double y_pos, y_neg, c_pos, c_neg;
    detail::scored_pair(params, trace.aggregated, train, t, variant, bag, y_pos, y_neg, c_pos,
                        c_neg);
    const double margin = y_pos - y_neg;
    result.loss += softplus_neg(margin);
    const double delta = sigmoid(margin) - 1.0;

    const double* ua = trace.aggregated.data.data() + static_cast<std::size_t>(t.user) * d;
    const double* vp = params.item_emb.data.data() + static_cast<std::size_t>(t.pos) * d;
    const double* vn = params.item_emb.data.data() + static_cast<std::size_t>(t.neg) * d;
    double* ga = d_agg.data.data() + static_cast<std::size_t>(t.user) * d;
    double* gb = bag_grad.data.data() + static_cast<std::size_t>(t.user) * d;
    double* gvp = g.item_emb.data.data() + static_cast<std::size_t>(t.pos) * d;
    double* gvn = g.item_emb.data.data() + static_cast<std::size_t>(t.neg) * d;
    for (std::size_t i = 0; i < d; ++i) {
      ga[i] += delta * (vp[i] - vn[i]);
      gvp[i] += delta * (ua[i] + c_pos * bag[i]);
      gvn[i] -= delta * (ua[i] + c_neg * bag[i]);
      gb[i] += delta * (c_pos * vp[i] - c_neg * vn[i]);
    }
    touched[t.user] = 1;
  }
  result.loss += lambda * l2_norm_squared(params, mode);

  // Scatter the per-user bag gradient onto every interacted item.
  for (std::size_t u = 0; u < n; ++u) {
    if (!touched[u]) continue;
    const double* gb = bag_grad.data.data() + u * d;
    for (std::uint32_t j : train.items_of_user[u]) {
      double* gv = g.item_emb.data.data() + static_cast<std::size_t>(j) * d;
      for (std::size_t i = 0; i < d; ++i) gv[i] += gb[i];
    }
  }

  // Aggregation backward: route dL/dU^(a) into the layer outputs.
  std::vector<DenseMatrix> d_out(k, DenseMatrix(n, d));
  if (k == 1 || mode == AttentionMode::kBase) {
    d_out[k - 1] = d_agg;
  } else if (mode == AttentionMode::kAverage) {
    const double inv_k = 1.0 / static_cast<double>(k);
    for (std::size_t l = 0; l < k; ++l)
      for (std::size_t i = 0; i < d_out[l].data.size(); ++i)
        d_out[l].data[i] = d_agg.data[i] * inv_k;
  } else {
    if (trace.attn_hidden.size() != k || trace.attn_weights.cols != k)
      throw ConfigError("backward: trace missing attention caches");
    const std::span<const double> h = params.attn_vector.row(0);
    std::vector<double> ds(k), da(k), dz(d), dq(d);
    for (std::size_t u = 0; u < n; ++u) {
      if (!touched[u]) continue;
      const double* ga = d_agg.data.data() + u * d;
      double dot = 0.0;
      for (std::size_t l = 0; l < k; ++l) {
        const double* ol = trace.layer_out[l].data.data() + u * d;
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) acc += ga[i] * ol[i];
        ds[l] = acc;
        dot += acc * trace.attn_weights(u, l);
      }
      std::fill(dq.begin(), dq.end(), 0.0);
      for (std::size_t l = 0; l < k; ++l) {
        const double s = trace.attn_weights(u, l);
        da[l] = s * (ds[l] - dot);
        const double* zl = trace.attn_hidden[l].data.data() + u * d;
        const double* ol = trace.layer_out[l].data.data() + u * d;
        double* dol = d_out[l].data.data() + u * d;
        double* gh = g.attn_vector.data.data();
        for (std::size_t i = 0; i < d; ++i) {
          const double relu = zl[i] > 0.0 ? zl[i] : 0.0;
          gh[i] += da[l] * relu;
          dz[i] = zl[i] > 0.0 ? da[l] * h[i] : 0.0;
          dq[i] += dz[i];
        }
        // dL/dP_o += out^(l)_u outer dz ; dL/dout^(l)_u += s*ga + dz P_o^T
        for (std::size_t r = 0; r < d; ++r) {
          const double ov = ol[r];
          double* gpo = g.attn_layer_proj.data.data() + r * d;
          const double* po = params.attn_layer_proj.data.data() + r * d;
          double acc = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            gpo[c] += ov * dz[c];
            acc += po[c] * dz[c];
          }
          dol[r] += s * ga[r] + acc;
        }
      }
      const double* uu = params.user_emb.data.data() + u * d;
      double* gu = g.user_emb.data.data() + u * d;
      for (std::size_t r = 0; r < d; ++r) {
        const double uv = uu[r];
        double* gpu = g.attn_query_proj.data.data() + r * d;
        const double* pu = params.attn_query_proj.data.data() + r * d;
        double acc = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          gpu[c] += uv * dq[c];
          acc += pu[c] * dq[c];
        }
        gu[r] += acc;
      }
    }
  }

  // Layer backward, top down. L is symmetric so L^T = L.
  const bool drop = trace.mode == RunMode::kTrain && trace.p1 > 0.0;
  const double keep_scale = drop ? 1.0 / (1.0 - trace.p1) : 1.0;
  for (std::size_t l = k; l-- > 0;) {
    DenseMatrix& go = d_out[l];
    if (drop) {
      const auto& mask = trace.dropout_mask[l];
      for (std::size_t i = 0; i < go.data.size(); ++i)
        go.data[i] = mask[i] ? go.data[i] * keep_scale : 0.0;
    }
    const DenseMatrix& act = trace.layer_act[l];
    for (std::size_t i = 0; i < go.data.size(); ++i)
      go.data[i] *= 1.0 - act.data[i] * act.data[i];
    const DenseMatrix dw = gemm_at_b(trace.layer_input[l], go);
    for (std::size_t i = 0; i < dw.data.size(); ++i) g.layer_weight[l].data[i] += dw.data[i];
    const DenseMatrix dh = gemm_a_bt(go, params.layer_weight[l]);
    const DenseMatrix d_below = spmm(trace.prop, dh);
    if (l > 0) {
      for (std::size_t i = 0; i < d_below.data.size(); ++i)
        d_out[l - 1].data[i] += d_below.data[i];
    } else {
      for (std::size_t i = 0; i < d_below.data.size(); ++i)
        g.user_emb.data[i] += d_below.data[i];
    }
  }

  // L2 term over the trainable set.
  const auto p_tensors = params.tensors();
  const auto g_tensors = g.tensors();
  const auto mask = trainable_mask(k, mode);
  for (std::size_t t = 0; t < p_tensors.size(); ++t) {
    if (!mask[t]) continue;
    for (std::size_t i = 0; i < p_tensors[t]->data.size(); ++i)
      g_tensors[t]->data[i] += 2.0 * lambda * p_tensors[t]->data[i];
  }
  return result;
}

// Deterministic batch loss on current params (no dropout), used as the
// scalar function the finite-difference oracle probes.
inline double batch_loss(const ModelParams& params, const PropMatrix& prop,
                         const InteractionSet& train, std::span<const Triple> batch,
                         double lambda, DecayVariant variant, AttentionMode attention) {
  RandomStream rng(0);  // unused: p1 = 0 draws nothing
  ForwardTrace trace = forward_pass(params, prop, 0.0, rng, RunMode::kEval, attention);
  double loss = 0.0;
  for (const Triple& t : batch) {
    const std::vector<double> bag = detail::item_bag(params, train, t.user);
    double y_pos, y_neg, c_pos, c_neg;
    detail::scored_pair(params, trace.aggregated, train, t, variant, bag, y_pos, y_neg, c_pos,
                        c_neg);
    loss += softplus_neg(y_pos - y_neg);
  }
  return loss + lambda * l2_norm_squared(params, attention);
}

struct GradCheckEntry {
  std::string tensor;
  double max_rel_err = 0.0;
  std::size_t coords_checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

// Central differences against the analytic gradients. Requires dropout
// disabled so the loss is a deterministic function of the parameters.
// Checks every coordinate when the parameter count is below 5000,
// otherwise a seeded sample per tensor. The analytic_override hook exists
// for fault-injection tests.
inline GradCheckReport finite_diff_check(ModelParams params, const PropMatrix& prop,
                                         const InteractionSet& train,
                                         std::span<const Triple> batch, double lambda,
                                         DecayVariant variant, AttentionMode attention,
                                         double epsilon = 1e-5, double threshold = 1e-4,
                                         std::uint64_t sample_seed = 0,
                                         const Gradients* analytic_override = nullptr) {
  RandomStream rng(0);
  Gradients analytic;
  if (analytic_override != nullptr) {
    analytic = *analytic_override;
  } else {
    ForwardTrace trace = forward_pass(params, prop, 0.0, rng, RunMode::kTrain, attention);
    analytic = backward(params, trace, train, batch, lambda, variant).grads;
  }

  const auto names = params.tensor_names();
  const auto mask = trainable_mask(params.k, attention);
  auto p_tensors = params.tensors();
  const auto a_tensors = analytic.tensors();

  std::size_t total = 0;
  for (std::size_t t = 0; t < p_tensors.size(); ++t)
    if (mask[t]) total += p_tensors[t]->data.size();
  const bool check_all = total < 5000;
  constexpr std::size_t kSamplePerTensor = 48;
  RandomStream pick(sample_seed);

  GradCheckReport report;
  report.threshold = threshold;
  for (std::size_t t = 0; t < p_tensors.size(); ++t) {
    if (!mask[t]) continue;
    DenseMatrix& tensor = *p_tensors[t];
    std::vector<std::size_t> coords;
    if (check_all || tensor.data.size() <= kSamplePerTensor) {
      coords.resize(tensor.data.size());
      for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    } else {
      for (std::size_t i = 0; i < kSamplePerTensor; ++i)
        coords.push_back(pick.uniform_int(tensor.data.size()));
    }
    GradCheckEntry entry;
    entry.tensor = names[t];
    entry.coords_checked = coords.size();
    for (std::size_t c : coords) {
      const double saved = tensor.data[c];
      tensor.data[c] = saved + epsilon;
      const double up = batch_loss(params, prop, train, batch, lambda, variant, attention);
      tensor.data[c] = saved - epsilon;
      const double dn = batch_loss(params, prop, train, batch, lambda, variant, attention);
      tensor.data[c] = saved;
      const double numeric = (up - dn) / (2.0 * epsilon);
      const double exact = a_tensors[t]->data[c];
      const double rel =
          std::abs(exact - numeric) / std::max({std::abs(exact), std::abs(numeric), 1e-8});
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  report.pass = report.max_rel_err <= threshold;
  return report;
}

}  // namespace hosr
