// Loading, splitting, synthesizing and summarizing interaction/social data.
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hosr/numerics.hpp"

namespace hosr {

using WarnFn = std::function<void(const std::string&)>;

inline void default_warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

// Observed user-item interactions with both per-user and per-item views.
struct InteractionSet {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::vector<std::vector<std::uint32_t>> items_of_user;  // sorted, unique
  std::vector<std::vector<std::uint32_t>> users_of_item;  // sorted, unique
  std::vector<std::size_t> pair_offset;                   // prefix sums over items_of_user

  std::size_t n_interactions() const { return pair_offset.empty() ? 0 : pair_offset.back(); }

  bool has(std::uint32_t user, std::uint32_t item) const {
    const auto& v = items_of_user[user];
    return std::binary_search(v.begin(), v.end(), item);
  }

  // Interaction pairs are indexed in (user asc, item asc) order.
  std::pair<std::uint32_t, std::uint32_t> pair_at(std::size_t index) const {
    const auto it = std::upper_bound(pair_offset.begin(), pair_offset.end(), index);
    const auto user = static_cast<std::uint32_t>(it - pair_offset.begin() - 1);
    return {user, items_of_user[user][index - pair_offset[user]]};
  }

  static InteractionSet from_pairs(std::size_t n_users, std::size_t n_items,
                                   const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs) {
    InteractionSet s;
    s.n_users = n_users;
    s.n_items = n_items;
    s.items_of_user.assign(n_users, {});
    for (const auto& [u, i] : pairs) {
      if (u >= n_users || i >= n_items) throw ConfigError("interaction id out of range");
      s.items_of_user[u].push_back(i);
    }
    s.finalize();
    return s;
  }

  // Sorts/dedups per-user lists and rebuilds the item view and offsets.
  void finalize() {
    users_of_item.assign(n_items, {});
    pair_offset.assign(n_users + 1, 0);
    for (std::size_t u = 0; u < n_users; ++u) {
      auto& v = items_of_user[u];
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
      pair_offset[u + 1] = pair_offset[u] + v.size();
      for (std::uint32_t i : v) users_of_item[i].push_back(static_cast<std::uint32_t>(u));
    }
  }
};

// Undirected user-user edges stored once with first < second.
struct EdgeList {
  std::size_t n_users = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // sorted, unique
};

struct SplitPair {
  InteractionSet train;
  InteractionSet test;
};

struct StatsReport {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t n_interactions = 0;
  std::size_t n_social_edges = 0;
  double interaction_density = 0.0;  // nnz / (n*m)
  double social_density = 0.0;       // 2|E| / n^2
  double avg_interactions_per_user = 0.0;
  double avg_relations_per_user = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> degree_histogram;  // (social degree, count)
  std::size_t cold_test_users = 0;  // test users with no training interactions
};

struct LoadedInteractions {
  InteractionSet set;
  std::vector<std::uint64_t> user_ids;  // dense id -> original id
  std::vector<std::uint64_t> item_ids;
  std::size_t duplicate_lines = 0;
};

struct LoadedSocial {
  EdgeList edges;
  std::size_t dropped_self_loops = 0;
  std::size_t dropped_unknown_users = 0;
};

namespace detail {

inline bool parse_id_pair(const std::string& line, std::uint64_t& a, std::uint64_t& b) {
  std::istringstream ss(line);
  std::string fa, fb, rest;
  if (!(ss >> fa >> fb)) return false;
  if (ss >> rest) return false;
  const auto is_number = [](const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
      if (c < '0' || c > '9') return false;
    return true;
  };
  if (!is_number(fa) || !is_number(fb)) return false;
  try {
    a = std::stoull(fa);
    b = std::stoull(fb);
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

inline bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

// Dense remap: sorted distinct original ids; identity detected by callers
// via user_ids[i] == i.
inline std::unordered_map<std::uint64_t, std::uint32_t> build_remap(
    std::vector<std::uint64_t> ids, std::vector<std::uint64_t>& table) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  table = ids;
  std::unordered_map<std::uint64_t, std::uint32_t> remap;
  remap.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) remap[ids[i]] = static_cast<std::uint32_t>(i);
  return remap;
}

}  // namespace detail

// One "user<TAB>item" pair per line. Ids are remapped densely to 0..n-1;
// the original ids are retained in the returned tables.
inline LoadedInteractions load_interactions(const std::string& path, const WarnFn& warn = default_warn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open interaction file: " + path);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> raw;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_blank(line)) continue;
    std::uint64_t u = 0, i = 0;
    if (!detail::parse_id_pair(line, u, i))
      throw DataError(path + ": parse error at line " + std::to_string(lineno));
    raw.emplace_back(u, i);
  }
  if (raw.empty()) throw DataError(path + ": no interactions found");

  LoadedInteractions out;
  std::vector<std::uint64_t> users, items;
  users.reserve(raw.size());
  items.reserve(raw.size());
  for (const auto& [u, i] : raw) {
    users.push_back(u);
    items.push_back(i);
  }
  const auto umap = detail::build_remap(std::move(users), out.user_ids);
  const auto imap = detail::build_remap(std::move(items), out.item_ids);

  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  pairs.reserve(raw.size());
  for (const auto& [u, i] : raw) pairs.emplace_back(umap.at(u), imap.at(i));
  std::sort(pairs.begin(), pairs.end());
  const auto dup_begin = std::unique(pairs.begin(), pairs.end());
  out.duplicate_lines = static_cast<std::size_t>(pairs.end() - dup_begin);
  pairs.erase(dup_begin, pairs.end());
  if (out.duplicate_lines > 0)
    warn(path + ": " + std::to_string(out.duplicate_lines) + " duplicate interaction(s) removed");

  out.set = InteractionSet::from_pairs(out.user_ids.size(), out.item_ids.size(), pairs);
  return out;
}

// One "user<TAB>user" pair per line. Symmetrized and deduplicated;
// self-loops are dropped with a warning. When a remap from an interaction
// load is supplied, edges touching users absent from it are dropped.
inline LoadedSocial load_social(const std::string& path,
                                const std::unordered_map<std::uint64_t, std::uint32_t>* user_remap = nullptr,
                                std::size_t n_users_hint = 0,
                                const WarnFn& warn = default_warn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open social file: " + path);
  LoadedSocial out;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::string line;
  std::size_t lineno = 0;
  std::uint64_t max_id = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_blank(line)) continue;
    std::uint64_t a = 0, b = 0;
    if (!detail::parse_id_pair(line, a, b))
      throw DataError(path + ": parse error at line " + std::to_string(lineno));
    if (a == b) {
      ++out.dropped_self_loops;
      continue;
    }
    if (user_remap != nullptr) {
      const auto ia = user_remap->find(a);
      const auto ib = user_remap->find(b);
      if (ia == user_remap->end() || ib == user_remap->end()) {
        ++out.dropped_unknown_users;
        continue;
      }
      a = ia->second;
      b = ib->second;
    }
    max_id = std::max(max_id, std::max(a, b));
    const auto lo = static_cast<std::uint32_t>(std::min(a, b));
    const auto hi = static_cast<std::uint32_t>(std::max(a, b));
    edges.emplace_back(lo, hi);
  }
  if (out.dropped_self_loops > 0)
    warn(path + ": dropped " + std::to_string(out.dropped_self_loops) + " self-loop(s)");
  if (out.dropped_unknown_users > 0)
    warn(path + ": dropped " + std::to_string(out.dropped_unknown_users) +
         " edge(s) touching users absent from the interaction data");
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  out.edges.edges = std::move(edges);
  out.edges.n_users = std::max<std::size_t>(n_users_hint, out.edges.edges.empty() ? 0 : max_id + 1);
  return out;
}

inline void write_interactions(const std::string& path, const InteractionSet& s) {
  std::ofstream outf(path);
  if (!outf) throw DataError("cannot write file: " + path);
  for (std::size_t u = 0; u < s.n_users; ++u)
    for (std::uint32_t i : s.items_of_user[u]) outf << u << '\t' << i << '\n';
}

inline void write_social(const std::string& path, const EdgeList& e) {
  std::ofstream outf(path);
  if (!outf) throw DataError("cannot write file: " + path);
  for (const auto& [a, b] : e.edges) outf << a << '\t' << b << '\n';
}

// Global uniform split over interaction pairs. Test users with no training
// interactions remain in the test set (cold users).
inline SplitPair split(const InteractionSet& inter, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split: ratio must be in (0,1)");
  const std::size_t total = inter.n_interactions();
  std::vector<std::size_t> index(total);
  for (std::size_t i = 0; i < total; ++i) index[i] = i;
  RandomStream rng(seed);
  rng.shuffle(index);
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(total)));

  std::vector<std::pair<std::uint32_t, std::uint32_t>> train_pairs, test_pairs;
  train_pairs.reserve(n_train);
  test_pairs.reserve(total - n_train);
  for (std::size_t i = 0; i < total; ++i) {
    const auto pair = inter.pair_at(index[i]);
    if (i < n_train)
      train_pairs.push_back(pair);
    else
      test_pairs.push_back(pair);
  }
  SplitPair out;
  out.train = InteractionSet::from_pairs(inter.n_users, inter.n_items, train_pairs);
  out.test = InteractionSet::from_pairs(inter.n_users, inter.n_items, test_pairs);
  return out;
}

// Synthetic dataset: configuration-model social graph with a heavy-tailed
// degree sequence plus a homophily-controlled interaction mixture. Every
// user ends up with at least one social relation.
inline std::pair<InteractionSet, EdgeList> synth_dataset(std::size_t n_users, std::size_t n_items,
                                                         double social_exponent, double homophily,
                                                         double avg_degree, double avg_interactions,
                                                         std::uint64_t seed) {
  if (n_users < 1 || n_items < 1) throw ConfigError("synth: counts must be >= 1");
  if (homophily < 0.0 || homophily > 1.0) throw ConfigError("synth: homophily must be in [0,1]");
  if (social_exponent <= 1.0) throw ConfigError("synth: exponent must be > 1");
  if (avg_degree < 1.0 || avg_interactions < 1.0) throw ConfigError("synth: averages must be >= 1");

  RandomStream rng(seed);
  std::vector<std::vector<std::uint32_t>> adj(n_users);
  bool graph_ok = false;
  for (int attempt = 0; attempt < 10 && !graph_ok; ++attempt) {
    for (auto& a : adj) a.clear();
    if (n_users < 2) break;

    // Pareto draws scaled to the requested mean, clamped to [1, n-1].
    std::vector<double> weight(n_users);
    double mean = 0.0;
    for (std::size_t i = 0; i < n_users; ++i) {
      const double u = 1.0 - rng.uniform();  // (0, 1]
      weight[i] = std::pow(u, -1.0 / (social_exponent - 1.0));
      mean += weight[i];
    }
    mean /= static_cast<double>(n_users);
    std::vector<std::size_t> degree(n_users);
    std::size_t total_stubs = 0;
    for (std::size_t i = 0; i < n_users; ++i) {
      auto d = static_cast<std::size_t>(std::llround(weight[i] * avg_degree / mean));
      d = std::clamp<std::size_t>(d, 1, n_users - 1);
      degree[i] = d;
      total_stubs += d;
    }
    if (total_stubs % 2 == 1) {
      for (std::size_t i = 0; i < n_users; ++i)
        if (degree[i] < n_users - 1) {
          ++degree[i];
          ++total_stubs;
          break;
        }
    }
    if (total_stubs % 2 == 1) continue;  // could not balance; retry

    std::vector<std::uint32_t> stubs;
    stubs.reserve(total_stubs);
    for (std::size_t i = 0; i < n_users; ++i)
      stubs.insert(stubs.end(), degree[i], static_cast<std::uint32_t>(i));
    rng.shuffle(stubs);

    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    edges.reserve(total_stubs / 2);
    for (std::size_t p = 0; p + 1 < stubs.size(); p += 2) {
      const std::uint32_t a = stubs[p], b = stubs[p + 1];
      if (a == b) continue;  // parallel stubs rejected
      edges.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    for (const auto& [a, b] : edges) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    // Rejected stubs can leave a user isolated; attach such users somewhere.
    for (std::size_t i = 0; i < n_users; ++i) {
      if (!adj[i].empty()) continue;
      for (int tries = 0; tries < 32 && adj[i].empty(); ++tries) {
        auto other = rng.uniform_index(n_users);
        if (other == i) continue;
        adj[i].push_back(other);
        adj[other].push_back(static_cast<std::uint32_t>(i));
      }
    }
    graph_ok = true;
    for (std::size_t i = 0; i < n_users; ++i)
      if (adj[i].empty()) graph_ok = false;
  }
  if (!graph_ok)
    throw DataError("synth: could not realize a social graph with >=1 relation per user");

  EdgeList social;
  social.n_users = n_users;
  for (std::size_t i = 0; i < n_users; ++i) {
    std::sort(adj[i].begin(), adj[i].end());
    adj[i].erase(std::unique(adj[i].begin(), adj[i].end()), adj[i].end());
    for (std::uint32_t j : adj[i])
      if (static_cast<std::uint32_t>(i) < j) social.edges.emplace_back(static_cast<std::uint32_t>(i), j);
  }
  std::sort(social.edges.begin(), social.edges.end());

  // Interaction targets share the heavy-tail shape; draws proceed in rounds
  // so that neighbor item pools exist before they are copied from.
  std::vector<double> iw(n_users);
  double imean = 0.0;
  for (std::size_t i = 0; i < n_users; ++i) {
    const double u = 1.0 - rng.uniform();
    iw[i] = std::pow(u, -1.0 / (social_exponent - 1.0));
    imean += iw[i];
  }
  imean /= static_cast<double>(n_users);
  std::vector<std::size_t> target(n_users);
  for (std::size_t i = 0; i < n_users; ++i) {
    auto t = static_cast<std::size_t>(std::llround(iw[i] * avg_interactions / imean));
    target[i] = std::clamp<std::size_t>(t, 1, n_items);
  }

  std::vector<std::vector<std::uint32_t>> items(n_users);  // unsorted during generation
  std::vector<std::vector<bool>> owned;
  const bool use_bitmap = n_items <= (1u << 20);
  if (use_bitmap) owned.assign(n_users, std::vector<bool>(n_items, false));
  const auto has_item = [&](std::size_t u, std::uint32_t it) {
    if (use_bitmap) return static_cast<bool>(owned[u][it]);
    return std::find(items[u].begin(), items[u].end(), it) != items[u].end();
  };
  const auto add_item = [&](std::size_t u, std::uint32_t it) {
    items[u].push_back(it);
    if (use_bitmap) owned[u][it] = true;
  };

  std::size_t max_target = 0;
  for (std::size_t t : target) max_target = std::max(max_target, t);
  for (std::size_t round = 0; round < max_target; ++round) {
    for (std::size_t u = 0; u < n_users; ++u) {
      if (items[u].size() > round || items[u].size() >= target[u]) continue;
      std::uint32_t item = 0;
      bool drawn = false;
      for (int tries = 0; tries < 32 && !drawn; ++tries) {
        if (rng.uniform() < homophily) {
          const auto& nb = adj[u];
          const std::uint32_t friend_id = nb[rng.uniform_index(nb.size())];
          if (!items[friend_id].empty()) {
            item = items[friend_id][rng.uniform_index(items[friend_id].size())];
            drawn = !has_item(u, item);
            continue;
          }
        }
        item = rng.uniform_index(n_items);
        drawn = !has_item(u, item);
      }
      if (drawn) add_item(u, item);
    }
  }

  InteractionSet inter;
  inter.n_users = n_users;
  inter.n_items = n_items;
  inter.items_of_user = std::move(items);
  inter.finalize();
  return {std::move(inter), std::move(social)};
}

inline StatsReport dataset_stats(const InteractionSet& inter, const EdgeList& social) {
  StatsReport r;
  r.n_users = inter.n_users;
  r.n_items = inter.n_items;
  r.n_interactions = inter.n_interactions();
  r.n_social_edges = social.edges.size();
  const double n = static_cast<double>(inter.n_users);
  const double m = static_cast<double>(inter.n_items);
  if (n > 0 && m > 0)
    r.interaction_density = static_cast<double>(r.n_interactions) / (n * m);
  if (n > 0) {
    r.social_density = 2.0 * static_cast<double>(r.n_social_edges) / (n * n);
    r.avg_interactions_per_user = static_cast<double>(r.n_interactions) / n;
    r.avg_relations_per_user = 2.0 * static_cast<double>(r.n_social_edges) / n;
  }
  std::vector<std::size_t> degree(inter.n_users, 0);
  for (const auto& [a, b] : social.edges) {
    if (a < degree.size()) ++degree[a];
    if (b < degree.size()) ++degree[b];
  }
  std::unordered_map<std::size_t, std::size_t> hist;
  for (std::size_t d : degree) ++hist[d];
  r.degree_histogram.assign(hist.begin(), hist.end());
  std::sort(r.degree_histogram.begin(), r.degree_histogram.end());
  return r;
}

inline std::size_t count_cold_test_users(const SplitPair& sp) {
  std::size_t cold = 0;
  for (std::size_t u = 0; u < sp.test.n_users; ++u)
    if (!sp.test.items_of_user[u].empty() && sp.train.items_of_user[u].empty()) ++cold;
  return cold;
}

}  // namespace hosr
