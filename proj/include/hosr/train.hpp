// BPR sampling, RMSprop, the epoch loop with graph/embedding dropout, and
// the flat key=value config format.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hosr/data.hpp"
#include "hosr/grad.hpp"
#include "hosr/graph.hpp"
#include "hosr/model.hpp"

namespace hosr {

// Training aborted on a non-finite loss.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t epoch, std::size_t batch, const std::string& what)
      : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch) + ": " + what),
        epoch(epoch),
        batch(batch) {}
  std::size_t epoch;
  std::size_t batch;
};

struct TrainConfig {
  std::size_t dim = 10;
  std::size_t layers = 3;
  double lr = 1e-3;
  double lambda = 1e-4;
  std::size_t batch_size = 512;
  std::size_t epochs = 100;
  double p1 = 0.0;   // embedding dropout
  double p2 = 0.2;   // graph dropout
  std::size_t eval_every = 10;  // 0 = never during training
  std::uint64_t seed = 1;
  DecayVariant decay = DecayVariant::kInvSqrtItems;
  AttentionMode attention = AttentionMode::kAttention;
  std::size_t k_eval = 20;

  void validate() const {
    if (dim < 1 || layers < 1) throw ConfigError("config: dim and layers must be >= 1");
    if (batch_size < 1) throw ConfigError("config: batch size must be >= 1");
    if (lr < 0.0) throw ConfigError("config: lr must be >= 0");
    if (lambda < 0.0) throw ConfigError("config: lambda must be >= 0");
    if (p1 < 0.0 || p1 >= 1.0 || p2 < 0.0 || p2 >= 1.0)
      throw ConfigError("config: dropout rates must be in [0,1)");
  }
};

inline AttentionMode parse_attention_mode(const std::string& s) {
  if (s == "attention") return AttentionMode::kAttention;
  if (s == "average") return AttentionMode::kAverage;
  if (s == "base") return AttentionMode::kBase;
  throw ConfigError("unknown attention mode: " + s);
}

inline std::string attention_mode_name(AttentionMode m) {
  switch (m) {
    case AttentionMode::kAttention: return "attention";
    case AttentionMode::kAverage: return "average";
    case AttentionMode::kBase: return "base";
  }
  return "?";
}

inline DecayVariant parse_decay_variant(const std::string& s) {
  if (s == "sqrt-items") return DecayVariant::kInvSqrtItems;
  if (s == "sqrt-items-users") return DecayVariant::kInvSqrtItemsUsers;
  throw ConfigError("unknown decay variant: " + s);
}

inline std::string decay_variant_name(DecayVariant v) {
  return v == DecayVariant::kInvSqrtItems ? "sqrt-items" : "sqrt-items-users";
}

// Applies one "key = value" assignment; throws on unknown keys.
inline void set_config_field(TrainConfig& cfg, const std::string& key, const std::string& value) {
  try {
    if (key == "dim") cfg.dim = std::stoul(value);
    else if (key == "layers") cfg.layers = std::stoul(value);
    else if (key == "lr") cfg.lr = std::stod(value);
    else if (key == "lambda") cfg.lambda = std::stod(value);
    else if (key == "batch") cfg.batch_size = std::stoul(value);
    else if (key == "epochs") cfg.epochs = std::stoul(value);
    else if (key == "p1") cfg.p1 = std::stod(value);
    else if (key == "p2") cfg.p2 = std::stod(value);
    else if (key == "eval_every") cfg.eval_every = std::stoul(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "decay") cfg.decay = parse_decay_variant(value);
    else if (key == "attention") cfg.attention = parse_attention_mode(value);
    else if (key == "k_eval") cfg.k_eval = std::stoul(value);
    else throw ConfigError("unknown config key: " + key);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config key '" + key + "': bad value '" + value + "'");
  } catch (const std::out_of_range&) {
    throw ConfigError("config key '" + key + "': value out of range");
  }
}

inline TrainConfig load_train_config(const std::string& path, TrainConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (detail::is_blank(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError(path + ": expected key = value at line " + std::to_string(lineno));
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    set_config_field(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

// batch_size triples: (user, pos) uniform over observed interactions, neg
// uniform over the items that user has not interacted with (rejection
// sampled). Users interacting with every item are skipped with a warning.
inline std::vector<Triple> sample_batch(const InteractionSet& train, std::size_t batch_size,
                                        RandomStream& rng, const WarnFn& warn = default_warn) {
  const std::size_t total = train.n_interactions();
  if (total == 0) throw ConfigError("sample_batch: empty training set");
  std::vector<Triple> batch;
  batch.reserve(batch_size);
  std::vector<std::uint8_t> warned(train.n_users, 0);
  std::size_t skippable = 0;
  for (std::size_t u = 0; u < train.n_users; ++u)
    if (train.items_of_user[u].size() >= train.n_items) ++skippable;
  if (skippable == train.n_users)
    throw ConfigError("sample_batch: every user interacts with every item");
  while (batch.size() < batch_size) {
    const auto [user, pos] = train.pair_at(rng.uniform_int(total));
    if (train.items_of_user[user].size() >= train.n_items) {
      if (!warned[user]) {
        warned[user] = 1;
        warn("sample_batch: user " + std::to_string(user) +
             " interacts with every item; skipped");
      }
      continue;
    }
    std::uint32_t neg = 0;
    do {
      neg = rng.uniform_index(train.n_items);
    } while (train.has(user, neg));
    batch.push_back({user, pos, neg});
  }
  return batch;
}

inline double bpr_loss(std::span<const double> pos_scores, std::span<const double> neg_scores,
                       double l2_norm_sq, double lambda) {
  if (pos_scores.size() != neg_scores.size())
    throw ConfigError("bpr_loss: score arrays must have equal length");
  double loss = 0.0;
  for (std::size_t i = 0; i < pos_scores.size(); ++i)
    loss += softplus_neg(pos_scores[i] - neg_scores[i]);
  return loss + lambda * l2_norm_sq;
}

inline double bpr_loss(std::span<const double> pos_scores, std::span<const double> neg_scores,
                       const ModelParams& params, AttentionMode mode, double lambda) {
  return bpr_loss(pos_scores, neg_scores, l2_norm_squared(params, mode), lambda);
}

// RMSprop: acc <- rho*acc + (1-rho)*g^2 ; theta <- theta - lr*g/(sqrt(acc)+eps)
struct OptimizerState {
  double rho = 0.9;
  double eps = 1e-8;
  std::vector<std::vector<double>> acc;  // running mean of squared gradients

  static OptimizerState for_tensors(const std::vector<const DenseMatrix*>& tensors,
                                    double rho = 0.9, double eps = 1e-8) {
    OptimizerState s;
    s.rho = rho;
    s.eps = eps;
    s.acc.reserve(tensors.size());
    for (const DenseMatrix* t : tensors) s.acc.emplace_back(t->data.size(), 0.0);
    return s;
  }
};

inline void rmsprop_step(const std::vector<DenseMatrix*>& params,
                         const std::vector<const DenseMatrix*>& grads, OptimizerState& state,
                         double lr) {
  if (params.size() != grads.size() || params.size() != state.acc.size())
    throw ConfigError("rmsprop_step: tensor count mismatch");
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& theta = params[t]->data;
    const auto& g = grads[t]->data;
    auto& acc = state.acc[t];
    if (theta.size() != g.size() || theta.size() != acc.size())
      throw ConfigError("rmsprop_step: tensor shape mismatch");
    for (std::size_t i = 0; i < theta.size(); ++i) {
      acc[i] = state.rho * acc[i] + (1.0 - state.rho) * g[i] * g[i];
      theta[i] -= lr * g[i] / (std::sqrt(acc[i]) + state.eps);
    }
  }
}

inline void rmsprop_step(ModelParams& params, const Gradients& grads, OptimizerState& state,
                         double lr) {
  const Gradients& g = grads;
  rmsprop_step(params.tensors(), g.tensors(), state, lr);
}

struct TrainLogEntry {
  std::size_t epoch = 0;
  double loss = 0.0;  // mean per sampled triple, L2 term included
  std::optional<double> recall;
  std::optional<double> map;
  double seconds = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<TrainLogEntry> log;
};

// Periodic-metrics hook so the training loop does not depend on the
// evaluation module; the CLI wires hosr::evaluate in here.
using EvalHook = std::function<std::pair<double, double>(const ModelParams&, const ForwardTrace&)>;

// One epoch = one pass of |train| sampled triples (with replacement).
// Graph dropout is resampled per epoch and the propagation matrix rebuilt
// from the surviving edges. Deterministic per (seed, config, data).
inline TrainResult train(const TrainConfig& config, const SplitPair& data,
                         const SocialGraph& social, const EvalHook& eval_hook = nullptr) {
  config.validate();
  const InteractionSet& tr = data.train;
  if (tr.n_interactions() == 0) throw ConfigError("train: empty training set");
  if (social.n_users != tr.n_users) throw ConfigError("train: social graph user count mismatch");

  RandomStream master(config.seed);
  const std::uint64_t init_seed = master.next_u64();
  RandomStream loop_rng = master.fork();

  TrainResult result;
  result.params = init_params(tr.n_users, tr.n_items, config.dim, config.layers, init_seed);
  OptimizerState opt = OptimizerState::for_tensors(
      static_cast<const ModelParams&>(result.params).tensors());

  const PropMatrix base_prop = propagation_matrix(social);
  const std::size_t n_triples = tr.n_interactions();
  const std::size_t n_batches = (n_triples + config.batch_size - 1) / config.batch_size;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    PropMatrix prop = base_prop;
    if (config.p2 > 0.0) {
      const SocialGraph dropped = graph_dropout(social, config.p2, loop_rng);
      prop = propagation_matrix(dropped);
    }
    double loss_sum = 0.0;
    std::size_t remaining = n_triples;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t bs = std::min(config.batch_size, remaining);
      remaining -= bs;
      const std::vector<Triple> batch = sample_batch(tr, bs, loop_rng);
      ForwardTrace trace =
          forward_pass(result.params, prop, config.p1, loop_rng, RunMode::kTrain, config.attention);
      BackwardResult back = backward(result.params, trace, tr, batch, config.lambda, config.decay);
      if (!std::isfinite(back.loss)) throw TrainingDiverged(epoch, b, "non-finite loss");
      rmsprop_step(result.params, back.grads, opt, config.lr);
      loss_sum += back.loss;
    }
    TrainLogEntry entry;
    entry.epoch = epoch;
    entry.loss = loss_sum / static_cast<double>(n_triples);
    if (eval_hook && config.eval_every > 0 && (epoch + 1) % config.eval_every == 0) {
      RandomStream unused(0);
      ForwardTrace eval_trace =
          forward_pass(result.params, base_prop, 0.0, unused, RunMode::kEval, config.attention);
      const auto [recall, map] = eval_hook(result.params, eval_trace);
      entry.recall = recall;
      entry.map = map;
    }
    entry.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(entry);
  }
  return result;
}

inline void write_trainlog_csv(const std::string& path, const std::vector<TrainLogEntry>& log,
                               std::size_t k_eval) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << "epoch,loss,recall@" << k_eval << ",map@" << k_eval << ",seconds\n";
  char buf[64];
  const auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& e : log) {
    out << e.epoch << ',' << fmt(e.loss) << ',';
    if (e.recall) out << fmt(*e.recall);
    out << ',';
    if (e.map) out << fmt(*e.map);
    out << ',' << fmt(e.seconds) << '\n';
  }
}

}  // namespace hosr
