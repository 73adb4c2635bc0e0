// BPR-MF and TrustSVD baselines. Both share the sampler, the BPR loss and
// the RMSprop step with the main model; only the scorer differs.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hosr/data.hpp"
#include "hosr/graph.hpp"
#include "hosr/train.hpp"

namespace hosr {

enum class ModelKind { kHosr, kBprMf, kTrustSvd };

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "hosr") return ModelKind::kHosr;
  if (s == "bpr") return ModelKind::kBprMf;
  if (s == "trustsvd") return ModelKind::kTrustSvd;
  throw ConfigError("unknown model: " + s);
}

inline std::string model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kHosr: return "hosr";
    case ModelKind::kBprMf: return "bpr";
    case ModelKind::kTrustSvd: return "trustsvd";
  }
  return "?";
}

struct BaselineParams {
  ModelKind variant = ModelKind::kBprMf;
  std::size_t n = 0, m = 0, d = 0;
  DenseMatrix user_emb;      // n x d
  DenseMatrix item_emb;      // m x d
  DenseMatrix item_implicit; // m x d, TrustSVD q vectors
  DenseMatrix trust_emb;     // n x d, TrustSVD w vectors

  std::vector<DenseMatrix*> tensors() {
    std::vector<DenseMatrix*> t{&user_emb, &item_emb};
    if (variant == ModelKind::kTrustSvd) {
      t.push_back(&item_implicit);
      t.push_back(&trust_emb);
    }
    return t;
  }
  std::vector<const DenseMatrix*> tensors() const {
    std::vector<const DenseMatrix*> t{&user_emb, &item_emb};
    if (variant == ModelKind::kTrustSvd) {
      t.push_back(&item_implicit);
      t.push_back(&trust_emb);
    }
    return t;
  }
  std::vector<std::string> tensor_names() const {
    std::vector<std::string> names{"user_emb", "item_emb"};
    if (variant == ModelKind::kTrustSvd) names.insert(names.end(), {"item_implicit", "trust_emb"});
    return names;
  }

  double l2_norm_squared() const {
    double total = 0.0;
    for (const DenseMatrix* t : tensors())
      for (double v : t->data) total += v * v;
    return total;
  }
};

inline BaselineParams init_baseline(ModelKind variant, std::size_t n, std::size_t m,
                                    std::size_t d, std::uint64_t seed, double scale = 0.01) {
  if (variant == ModelKind::kHosr) throw ConfigError("init_baseline: not a baseline variant");
  BaselineParams p;
  p.variant = variant;
  p.n = n;
  p.m = m;
  p.d = d;
  RandomStream rng(seed);
  const auto fill = [&rng, scale](DenseMatrix& t) {
    for (double& v : t.data) v = rng.uniform(-scale, scale);
  };
  p.user_emb = DenseMatrix(n, d);
  p.item_emb = DenseMatrix(m, d);
  fill(p.user_emb);
  fill(p.item_emb);
  if (variant == ModelKind::kTrustSvd) {
    p.item_implicit = DenseMatrix(m, d);
    p.trust_emb = DenseMatrix(n, d);
    fill(p.item_implicit);
    fill(p.trust_emb);
  }
  return p;
}

inline double score_bpr_mf(const BaselineParams& p, std::uint32_t user, std::uint32_t item) {
  if (user >= p.n || item >= p.m) throw ConfigError("score_bpr_mf: id out of range");
  const double* u = p.user_emb.data.data() + static_cast<std::size_t>(user) * p.d;
  const double* v = p.item_emb.data.data() + static_cast<std::size_t>(item) * p.d;
  double s = 0.0;
  for (std::size_t i = 0; i < p.d; ++i) s += u[i] * v[i];
  return s;
}

namespace detail {

// Effective TrustSVD user vector: u + |I|^{-1/2} sum q_{j'} + |A|^{-1/2} sum w_{i'}.
inline std::vector<double> trustsvd_user_vector(const BaselineParams& p,
                                                const InteractionSet& train,
                                                const SocialGraph& social, std::uint32_t user) {
  std::vector<double> e(p.d);
  const double* u = p.user_emb.data.data() + static_cast<std::size_t>(user) * p.d;
  for (std::size_t i = 0; i < p.d; ++i) e[i] = u[i];
  const auto& items = train.items_of_user[user];
  if (!items.empty()) {
    const double c = 1.0 / std::sqrt(static_cast<double>(items.size()));
    for (std::uint32_t j : items) {
      const double* q = p.item_implicit.data.data() + static_cast<std::size_t>(j) * p.d;
      for (std::size_t i = 0; i < p.d; ++i) e[i] += c * q[i];
    }
  }
  const auto friends = social.neighbors(user);
  if (!friends.empty()) {
    const double c = 1.0 / std::sqrt(static_cast<double>(friends.size()));
    for (std::uint32_t f : friends) {
      const double* w = p.trust_emb.data.data() + static_cast<std::size_t>(f) * p.d;
      for (std::size_t i = 0; i < p.d; ++i) e[i] += c * w[i];
    }
  }
  return e;
}

}  // namespace detail

inline double score_trustsvd(const BaselineParams& p, const InteractionSet& train,
                             const SocialGraph& social, std::uint32_t user, std::uint32_t item) {
  if (user >= p.n || item >= p.m) throw ConfigError("score_trustsvd: id out of range");
  const std::vector<double> e = detail::trustsvd_user_vector(p, train, social, user);
  const double* v = p.item_emb.data.data() + static_cast<std::size_t>(item) * p.d;
  double s = 0.0;
  for (std::size_t i = 0; i < p.d; ++i) s += e[i] * v[i];
  return s;
}

struct BaselineBackwardResult {
  double loss = 0.0;
  BaselineParams grads;  // same shapes, gradient values
};

inline BaselineBackwardResult backward_baseline(const BaselineParams& p,
                                                const InteractionSet& train,
                                                const SocialGraph& social,
                                                std::span<const Triple> batch, double lambda) {
  BaselineBackwardResult result;
  result.grads.variant = p.variant;
  result.grads.n = p.n;
  result.grads.m = p.m;
  result.grads.d = p.d;
  result.grads.user_emb = DenseMatrix(p.n, p.d);
  result.grads.item_emb = DenseMatrix(p.m, p.d);
  if (p.variant == ModelKind::kTrustSvd) {
    result.grads.item_implicit = DenseMatrix(p.m, p.d);
    result.grads.trust_emb = DenseMatrix(p.n, p.d);
  }
  BaselineParams& g = result.grads;
  const std::size_t d = p.d;

  for (const Triple& t : batch) {
    std::vector<double> e;
    double c_items = 0.0, c_friends = 0.0;
    if (p.variant == ModelKind::kTrustSvd) {
      e = detail::trustsvd_user_vector(p, train, social, t.user);
      const std::size_t ni = train.items_of_user[t.user].size();
      c_items = ni > 0 ? 1.0 / std::sqrt(static_cast<double>(ni)) : 0.0;
      const std::size_t na = social.neighbors(t.user).size();
      c_friends = na > 0 ? 1.0 / std::sqrt(static_cast<double>(na)) : 0.0;
    } else {
      const double* u = p.user_emb.data.data() + static_cast<std::size_t>(t.user) * d;
      e.assign(u, u + d);
    }
    const double* vp = p.item_emb.data.data() + static_cast<std::size_t>(t.pos) * d;
    const double* vn = p.item_emb.data.data() + static_cast<std::size_t>(t.neg) * d;
    double y_pos = 0.0, y_neg = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      y_pos += e[i] * vp[i];
      y_neg += e[i] * vn[i];
    }
    const double margin = y_pos - y_neg;
    result.loss += softplus_neg(margin);
    const double delta = sigmoid(margin) - 1.0;

    double* gu = g.user_emb.data.data() + static_cast<std::size_t>(t.user) * d;
    double* gvp = g.item_emb.data.data() + static_cast<std::size_t>(t.pos) * d;
    double* gvn = g.item_emb.data.data() + static_cast<std::size_t>(t.neg) * d;
    for (std::size_t i = 0; i < d; ++i) {
      const double de = delta * (vp[i] - vn[i]);  // dL/de_i
      gu[i] += de;
      gvp[i] += delta * e[i];
      gvn[i] -= delta * e[i];
      if (p.variant == ModelKind::kTrustSvd) {
        for (std::uint32_t j : train.items_of_user[t.user])
          g.item_implicit.data[static_cast<std::size_t>(j) * d + i] += c_items * de;
        for (std::uint32_t f : social.neighbors(t.user))
          g.trust_emb.data[static_cast<std::size_t>(f) * d + i] += c_friends * de;
      }
    }
  }
  result.loss += lambda * p.l2_norm_squared();

  const auto pt = p.tensors();
  const auto gt = g.tensors();
  for (std::size_t t = 0; t < pt.size(); ++t)
    for (std::size_t i = 0; i < pt[t]->data.size(); ++i)
      gt[t]->data[i] += 2.0 * lambda * pt[t]->data[i];
  return result;
}

inline double baseline_batch_loss(const BaselineParams& p, const InteractionSet& train,
                                  const SocialGraph& social, std::span<const Triple> batch,
                                  double lambda) {
  double loss = 0.0;
  for (const Triple& t : batch) {
    const double y_pos = p.variant == ModelKind::kTrustSvd
                             ? score_trustsvd(p, train, social, t.user, t.pos)
                             : score_bpr_mf(p, t.user, t.pos);
    const double y_neg = p.variant == ModelKind::kTrustSvd
                             ? score_trustsvd(p, train, social, t.user, t.neg)
                             : score_bpr_mf(p, t.user, t.neg);
    loss += softplus_neg(y_pos - y_neg);
  }
  return loss + lambda * p.l2_norm_squared();
}

// Central-difference check mirroring the one for the main model.
inline GradCheckReport baseline_finite_diff_check(BaselineParams params,
                                                  const InteractionSet& train,
                                                  const SocialGraph& social,
                                                  std::span<const Triple> batch, double lambda,
                                                  double epsilon = 1e-5,
                                                  double threshold = 1e-4) {
  const BaselineBackwardResult analytic = backward_baseline(params, train, social, batch, lambda);
  const auto names = params.tensor_names();
  auto p_tensors = params.tensors();
  const auto a_tensors = analytic.grads.tensors();

  GradCheckReport report;
  report.threshold = threshold;
  for (std::size_t t = 0; t < p_tensors.size(); ++t) {
    DenseMatrix& tensor = *p_tensors[t];
    GradCheckEntry entry;
    entry.tensor = names[t];
    entry.coords_checked = tensor.data.size();
    for (std::size_t c = 0; c < tensor.data.size(); ++c) {
      const double saved = tensor.data[c];
      tensor.data[c] = saved + epsilon;
      const double up = baseline_batch_loss(params, train, social, batch, lambda);
      tensor.data[c] = saved - epsilon;
      const double dn = baseline_batch_loss(params, train, social, batch, lambda);
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

struct BaselineTrainResult {
  BaselineParams params;
  std::vector<TrainLogEntry> log;
};

// Same epoch protocol as the main model; graph dropout does not apply
// (the scorers use the full social graph, or none at all).
inline BaselineTrainResult train_baseline(ModelKind variant, const TrainConfig& config,
                                          const SplitPair& data, const SocialGraph& social) {
  config.validate();
  const InteractionSet& tr = data.train;
  if (tr.n_interactions() == 0) throw ConfigError("train_baseline: empty training set");

  RandomStream master(config.seed);
  const std::uint64_t init_seed = master.next_u64();
  RandomStream loop_rng = master.fork();

  BaselineTrainResult result;
  result.params = init_baseline(variant, tr.n_users, tr.n_items, config.dim, init_seed);
  OptimizerState opt = OptimizerState::for_tensors(
      static_cast<const BaselineParams&>(result.params).tensors());

  const std::size_t n_triples = tr.n_interactions();
  const std::size_t n_batches = (n_triples + config.batch_size - 1) / config.batch_size;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    std::size_t remaining = n_triples;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t bs = std::min(config.batch_size, remaining);
      remaining -= bs;
      const std::vector<Triple> batch = sample_batch(tr, bs, loop_rng);
      BaselineBackwardResult back = backward_baseline(result.params, tr, social, batch,
                                                      config.lambda);
      if (!std::isfinite(back.loss)) throw TrainingDiverged(epoch, b, "non-finite loss");
      rmsprop_step(result.params.tensors(),
                   static_cast<const BaselineParams&>(back.grads).tensors(), opt, config.lr);
      loss_sum += back.loss;
    }
    TrainLogEntry entry;
    entry.epoch = epoch;
    entry.loss = loss_sum / static_cast<double>(n_triples);
    entry.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(entry);
  }
  return result;
}

}  // namespace hosr
