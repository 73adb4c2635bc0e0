// Top-K ranking metrics, sparsity-group analysis, attention-weight
// breakdowns and the paired significance test.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "hosr/data.hpp"
#include "hosr/graph.hpp"
#include "hosr/model.hpp"

namespace hosr {

// Candidate items of one user sorted by descending score; ties break by
// ascending item id; the user's training items are excluded.
inline std::vector<std::uint32_t> rank_items(std::span<const double> scores,
                                             const std::vector<std::uint32_t>& train_items) {
  std::vector<std::uint32_t> ranked;
  ranked.reserve(scores.size() - train_items.size());
  for (std::uint32_t j = 0; j < scores.size(); ++j)
    if (!std::binary_search(train_items.begin(), train_items.end(), j)) ranked.push_back(j);
  std::stable_sort(ranked.begin(), ranked.end(), [&scores](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  return ranked;
}

// |top-K intersect positives| / |positives|
inline double recall_at_k(std::span<const std::uint32_t> ranked,
                          const std::vector<std::uint32_t>& positives, std::size_t k) {
  if (positives.empty()) throw ConfigError("recall_at_k: positives must be nonempty");
  const std::size_t depth = std::min(k, ranked.size());
  std::size_t hits = 0;
  for (std::size_t p = 0; p < depth; ++p)
    if (std::binary_search(positives.begin(), positives.end(), ranked[p])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(positives.size());
}

// AP@K = (sum over hit positions p <= K of precision@p) / min(|positives|, K)
inline double average_precision_at_k(std::span<const std::uint32_t> ranked,
                                     const std::vector<std::uint32_t>& positives, std::size_t k) {
  if (positives.empty()) throw ConfigError("average_precision_at_k: positives must be nonempty");
  const std::size_t depth = std::min(k, ranked.size());
  std::size_t hits = 0;
  double score = 0.0;
  for (std::size_t p = 0; p < depth; ++p) {
    if (std::binary_search(positives.begin(), positives.end(), ranked[p])) {
      ++hits;
      score += static_cast<double>(hits) / static_cast<double>(p + 1);
    }
  }
  return score / static_cast<double>(std::min(positives.size(), k));
}

using ScoreFn = std::function<std::vector<double>(std::uint32_t user)>;

struct EvalReport {
  std::size_t k = 20;
  std::vector<std::uint32_t> users;        // evaluated users (>= 1 test positive)
  std::vector<double> recall;              // per evaluated user
  std::vector<double> ap;
  std::vector<std::size_t> train_count;    // training interactions per evaluated user
  double mean_recall = 0.0;
  double mean_ap = 0.0;
};

// Scores every test user with at least one held-out positive, masks that
// user's training items, ranks the rest and computes both metrics. Users
// are partitioned statically across threads; aggregation order is fixed,
// so the report is identical for any thread count.
inline EvalReport evaluate(const ScoreFn& scorer, const SplitPair& split, std::size_t k,
                           std::size_t threads = 1) {
  EvalReport report;
  report.k = k;
  const std::size_t n = split.test.n_users;
  for (std::uint32_t u = 0; u < n; ++u)
    if (!split.test.items_of_user[u].empty()) report.users.push_back(u);
  report.recall.assign(report.users.size(), 0.0);
  report.ap.assign(report.users.size(), 0.0);
  report.train_count.assign(report.users.size(), 0);

  const auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const std::uint32_t u = report.users[idx];
      const std::vector<double> scores = scorer(u);
      const auto ranked = rank_items(scores, split.train.items_of_user[u]);
      const auto& positives = split.test.items_of_user[u];
      report.recall[idx] = recall_at_k(ranked, positives, k);
      report.ap[idx] = average_precision_at_k(ranked, positives, k);
      report.train_count[idx] = split.train.items_of_user[u].size();
    }
  };
  threads = std::max<std::size_t>(1, threads);
  if (threads == 1 || report.users.size() < 2 * threads) {
    worker(0, report.users.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (report.users.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(begin + chunk, report.users.size());
      if (begin >= end) break;
      pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  if (!report.users.empty()) {
    report.mean_recall = std::accumulate(report.recall.begin(), report.recall.end(), 0.0) /
                         static_cast<double>(report.users.size());
    report.mean_ap = std::accumulate(report.ap.begin(), report.ap.end(), 0.0) /
                     static_cast<double>(report.users.size());
  }
  return report;
}

struct SparsityGroups {
  std::vector<std::vector<std::size_t>> members;      // indices into EvalReport arrays
  std::vector<std::pair<std::size_t, std::size_t>> count_range;  // [min,max] train count per group
};

// Test users sorted by training-interaction count, then greedily cut into
// groups of (approximately) equal summed training interactions.
inline SparsityGroups sparsity_groups(const EvalReport& report, std::size_t n_groups = 4) {
  if (n_groups < 1) throw ConfigError("sparsity_groups: n_groups must be >= 1");
  SparsityGroups out;
  std::vector<std::size_t> order(report.users.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&report](std::size_t a, std::size_t b) {
    if (report.train_count[a] != report.train_count[b])
      return report.train_count[a] < report.train_count[b];
    return report.users[a] < report.users[b];
  });
  double total = 0.0;
  for (std::size_t c : report.train_count) total += static_cast<double>(c);

  out.members.assign(n_groups, {});
  out.count_range.assign(n_groups, {0, 0});
  double cum = 0.0;
  std::size_t group = 0;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::size_t idx = order[pos];
    out.members[group].push_back(idx);
    cum += static_cast<double>(report.train_count[idx]);
    const double boundary =
        total * static_cast<double>(group + 1) / static_cast<double>(n_groups);
    if (cum >= boundary && group + 1 < n_groups && pos + 1 < order.size()) ++group;
  }
  for (std::size_t g = 0; g < n_groups; ++g) {
    if (out.members[g].empty()) continue;
    std::size_t lo = report.train_count[out.members[g].front()];
    std::size_t hi = lo;
    for (std::size_t idx : out.members[g]) {
      lo = std::min(lo, report.train_count[idx]);
      hi = std::max(hi, report.train_count[idx]);
    }
    out.count_range[g] = {lo, hi};
  }
  return out;
}

struct GroupMetrics {
  std::vector<double> recall;  // mean per group
  std::vector<double> ap;
  std::vector<std::size_t> size;
};

inline GroupMetrics group_metrics(const EvalReport& report, const SparsityGroups& groups) {
  GroupMetrics gm;
  gm.recall.assign(groups.members.size(), 0.0);
  gm.ap.assign(groups.members.size(), 0.0);
  gm.size.assign(groups.members.size(), 0);
  for (std::size_t g = 0; g < groups.members.size(); ++g) {
    gm.size[g] = groups.members[g].size();
    if (gm.size[g] == 0) continue;
    for (std::size_t idx : groups.members[g]) {
      gm.recall[g] += report.recall[idx];
      gm.ap[g] += report.ap[idx];
    }
    gm.recall[g] /= static_cast<double>(gm.size[g]);
    gm.ap[g] /= static_cast<double>(gm.size[g]);
  }
  return gm;
}

struct AttentionBinRow {
  std::string axis;  // "social_degree" or "interactions"
  std::size_t bin = 0;
  std::size_t range_lo = 0;
  std::size_t range_hi = 0;
  std::size_t layer = 0;  // 1-based
  double mean_weight = 0.0;
  std::size_t n_users = 0;
};

namespace detail {

inline void attention_bins_for_axis(const DenseMatrix& weights,
                                    const std::vector<std::size_t>& value_of_user,
                                    const std::string& axis, std::size_t n_bins,
                                    std::vector<AttentionBinRow>& rows) {
  const std::size_t n = weights.rows, k = weights.cols;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&value_of_user](std::size_t a, std::size_t b) {
    if (value_of_user[a] != value_of_user[b]) return value_of_user[a] < value_of_user[b];
    return a < b;
  });
  for (std::size_t b = 0; b < n_bins; ++b) {
    const std::size_t begin = b * n / n_bins;
    const std::size_t end = (b + 1) * n / n_bins;
    if (begin >= end) continue;
    std::vector<double> mean(k, 0.0);
    std::size_t lo = value_of_user[order[begin]], hi = lo;
    for (std::size_t pos = begin; pos < end; ++pos) {
      const std::size_t u = order[pos];
      lo = std::min(lo, value_of_user[u]);
      hi = std::max(hi, value_of_user[u]);
      for (std::size_t l = 0; l < k; ++l) mean[l] += weights(u, l);
    }
    for (std::size_t l = 0; l < k; ++l) {
      AttentionBinRow row;
      row.axis = axis;
      row.bin = b;
      row.range_lo = lo;
      row.range_hi = hi;
      row.layer = l + 1;
      row.mean_weight = mean[l] / static_cast<double>(end - begin);
      row.n_users = end - begin;
      rows.push_back(std::move(row));
    }
  }
}

}  // namespace detail

// Mean attention weight per layer, with users binned by social degree and
// by training-interaction count (equal-population bins).
inline std::vector<AttentionBinRow> attention_report(const DenseMatrix& attn_weights,
                                                     const SocialGraph& social,
                                                     const InteractionSet& train_inter,
                                                     std::size_t n_bins = 4) {
  if (attn_weights.cols < 2)
    throw ConfigError("attention_report: attention undefined for single layer");
  if (attn_weights.rows != social.n_users)
    throw ConfigError("attention_report: weight/user count mismatch");
  std::vector<AttentionBinRow> rows;
  std::vector<std::size_t> degree(social.n_users);
  for (std::size_t u = 0; u < social.n_users; ++u) degree[u] = social.degree[u];
  detail::attention_bins_for_axis(attn_weights, degree, "social_degree", n_bins, rows);
  std::vector<std::size_t> inters(social.n_users);
  for (std::size_t u = 0; u < social.n_users; ++u)
    inters[u] = train_inter.items_of_user[u].size();
  detail::attention_bins_for_axis(attn_weights, inters, "interactions", n_bins, rows);
  return rows;
}

// Two-sided paired t-test over per-user metric differences.
namespace detail {

// Regularized incomplete beta via Lentz's continued fraction.
inline double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-14;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

inline double reg_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail

// p-value of the two-sided t statistic with df degrees of freedom.
inline double student_t_two_sided_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  return detail::reg_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

inline double paired_significance(std::span<const double> a, std::span<const double> b,
                                  const WarnFn& warn = default_warn) {
  if (a.size() != b.size() || a.size() < 2)
    throw ConfigError("paired_significance: need equal-length arrays of size >= 2");
  const auto n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double var = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = (a[i] - b[i]) - mean;
    var += d * d;
  }
  var /= n - 1.0;
  if (var == 0.0) {
    if (mean == 0.0) return 1.0;
    warn("paired_significance: zero variance with nonzero mean difference");
    return 0.0;
  }
  const double t = mean / std::sqrt(var / n);
  return student_t_two_sided_p(t, n - 1.0);
}

// ---- CSV emission ----------------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_eval_summary_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << "metric,value\n";
  out << "recall@" << report.k << ',' << detail::fmt_double(report.mean_recall) << '\n';
  out << "map@" << report.k << ',' << detail::fmt_double(report.mean_ap) << '\n';
  out << "evaluated_users," << report.users.size() << '\n';
}

inline void write_eval_users_csv(const std::string& path, const EvalReport& report,
                                 const SparsityGroups& groups) {
  std::vector<std::size_t> group_of(report.users.size(), 0);
  for (std::size_t g = 0; g < groups.members.size(); ++g)
    for (std::size_t idx : groups.members[g]) group_of[idx] = g;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << "user_id,group,recall,ap\n";
  for (std::size_t i = 0; i < report.users.size(); ++i)
    out << report.users[i] << ',' << group_of[i] << ',' << detail::fmt_double(report.recall[i])
        << ',' << detail::fmt_double(report.ap[i]) << '\n';
}

inline void write_group_csv(const std::string& path, const std::string& model,
                            const EvalReport& report, const SparsityGroups& groups) {
  const GroupMetrics gm = group_metrics(report, groups);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << "group,range,model,recall@" << report.k << ",map@" << report.k << ",users\n";
  for (std::size_t g = 0; g < groups.members.size(); ++g) {
    out << g << ',' << groups.count_range[g].first << '-' << groups.count_range[g].second << ','
        << model << ',' << detail::fmt_double(gm.recall[g]) << ','
        << detail::fmt_double(gm.ap[g]) << ',' << gm.size[g] << '\n';
  }
}

inline void write_attention_weights_csv(const std::string& path, const DenseMatrix& weights) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << "user_id,layer,weight\n";
  for (std::size_t u = 0; u < weights.rows; ++u)
    for (std::size_t l = 0; l < weights.cols; ++l)
      out << u << ',' << (l + 1) << ',' << detail::fmt_double(weights(u, l)) << '\n';
}

inline void write_attention_bins_csv(const std::string& path,
                                     const std::vector<AttentionBinRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << "axis,bin,range_lo,range_hi,layer,mean_weight,users\n";
  for (const auto& r : rows)
    out << r.axis << ',' << r.bin << ',' << r.range_lo << ',' << r.range_hi << ',' << r.layer
        << ',' << detail::fmt_double(r.mean_weight) << ',' << r.n_users << '\n';
}

inline void write_stats_csv(const std::string& path, const StatsReport& r) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << "key,value\n";
  out << "n_users," << r.n_users << '\n';
  out << "n_items," << r.n_items << '\n';
  out << "n_interactions," << r.n_interactions << '\n';
  out << "n_social_edges," << r.n_social_edges << '\n';
  out << "interaction_density," << detail::fmt_double(r.interaction_density) << '\n';
  out << "social_density," << detail::fmt_double(r.social_density) << '\n';
  out << "avg_interactions_per_user," << detail::fmt_double(r.avg_interactions_per_user) << '\n';
  out << "avg_relations_per_user," << detail::fmt_double(r.avg_relations_per_user) << '\n';
  out << "cold_test_users," << r.cold_test_users << '\n';
}

inline void write_degree_hist_csv(const std::string& path, const StatsReport& r) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << "degree,count\n";
  for (const auto& [deg, count] : r.degree_histogram) out << deg << ',' << count << '\n';
}

inline void write_korder_csv(const std::string& path, const std::vector<NeighborCensus>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << "order,density,avg_neighbors\n";
  for (const auto& c : rows)
    out << c.order << ',' << detail::fmt_double(c.density) << ','
        << detail::fmt_double(c.avg_neighbors) << '\n';
}

}  // namespace hosr
