// Social graph construction, symmetric normalization, per-epoch edge
// dropout and the k-order neighbor census.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "hosr/data.hpp"
#include "hosr/numerics.hpp"

namespace hosr {

// Symmetric adjacency with zero diagonal plus per-user degrees.
struct SocialGraph {
  std::size_t n_users = 0;
  SparseMatrix adjacency;
  std::vector<std::size_t> degree;

  std::span<const std::uint32_t> neighbors(std::uint32_t user) const {
    const std::size_t begin = adjacency.row_ptr[user];
    const std::size_t end = adjacency.row_ptr[user + 1];
    return {adjacency.col_idx.data() + begin, end - begin};
  }
};

// Normalized propagation matrix: entry (i,j) = 1/sqrt(d_i * d_j) with
// self-loop-inclusive degrees d_i = degree_i + 1, diagonal included.
struct PropMatrix {
  SparseMatrix matrix;
};

struct NeighborCensus {
  std::size_t order = 0;
  std::vector<std::size_t> reachable;  // per user, within <= order hops, self excluded
  double avg_neighbors = 0.0;
  double density = 0.0;  // avg / (n_users - 1)
};

inline SocialGraph build_graph(const EdgeList& edges, std::size_t n_users) {
  SocialGraph g;
  g.n_users = n_users;
  std::vector<std::vector<std::uint32_t>> adj(n_users);
  for (const auto& [a, b] : edges.edges) {
    if (a >= n_users || b >= n_users) throw ConfigError("build_graph: edge endpoint out of range");
    if (a == b) throw ConfigError("build_graph: self-loop in edge list");
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  g.adjacency = SparseMatrix(n_users, n_users);
  g.degree.resize(n_users);
  for (std::size_t i = 0; i < n_users; ++i) {
    auto& row = adj[i];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    g.degree[i] = row.size();
    for (std::uint32_t j : row) {
      g.adjacency.col_idx.push_back(j);
      g.adjacency.values.push_back(1.0);
    }
    g.adjacency.row_ptr[i + 1] = g.adjacency.col_idx.size();
  }
  return g;
}

inline PropMatrix propagation_matrix(const SocialGraph& g) {
  const std::size_t n = g.n_users;
  PropMatrix p;
  p.matrix = SparseMatrix(n, n);
  p.matrix.col_idx.reserve(g.adjacency.nnz() + n);
  p.matrix.values.reserve(g.adjacency.nnz() + n);
  for (std::size_t i = 0; i < n; ++i) {
    const double di = static_cast<double>(g.degree[i] + 1);
    bool diag_done = false;
    for (std::size_t q = g.adjacency.row_ptr[i]; q < g.adjacency.row_ptr[i + 1]; ++q) {
      const std::uint32_t j = g.adjacency.col_idx[q];
      if (!diag_done && j > i) {
        p.matrix.col_idx.push_back(static_cast<std::uint32_t>(i));
        p.matrix.values.push_back(1.0 / di);
        diag_done = true;
      }
      const double dj = static_cast<double>(g.degree[j] + 1);
      p.matrix.col_idx.push_back(j);
      p.matrix.values.push_back(1.0 / std::sqrt(di * dj));
    }
    if (!diag_done) {
      p.matrix.col_idx.push_back(static_cast<std::uint32_t>(i));
      p.matrix.values.push_back(1.0 / di);
    }
    p.matrix.row_ptr[i + 1] = p.matrix.col_idx.size();
  }
  return p;
}

// Each undirected edge is kept with probability 1 - p2; both directions are
// dropped together so the result stays symmetric. Degrees are those of the
// surviving graph; no value rescaling.
inline SocialGraph graph_dropout(const SocialGraph& g, double p2, RandomStream& rng) {
  if (p2 < 0.0 || p2 >= 1.0) throw ConfigError("graph_dropout: p2 must be in [0,1)");
  EdgeList kept;
  kept.n_users = g.n_users;
  for (std::size_t i = 0; i < g.n_users; ++i) {
    for (std::size_t q = g.adjacency.row_ptr[i]; q < g.adjacency.row_ptr[i + 1]; ++q) {
      const std::uint32_t j = g.adjacency.col_idx[q];
      if (j <= i) continue;  // visit each undirected edge once
      if (rng.uniform() >= p2) kept.edges.emplace_back(static_cast<std::uint32_t>(i), j);
    }
  }
  return build_graph(kept, g.n_users);
}

// Distinct users reachable within <= k hops, self excluded (BFS per user).
inline NeighborCensus korder_neighbors(const SocialGraph& g, std::size_t k) {
  if (k < 1) throw ConfigError("korder_neighbors: k must be >= 1");
  const std::size_t n = g.n_users;
  NeighborCensus census;
  census.order = k;
  census.reachable.assign(n, 0);

  std::vector<std::uint32_t> frontier, next;
  std::vector<std::uint8_t> seen(n, 0);
  std::vector<std::uint32_t> touched;
  for (std::size_t s = 0; s < n; ++s) {
    frontier.clear();
    touched.clear();
    frontier.push_back(static_cast<std::uint32_t>(s));
    seen[s] = 1;
    touched.push_back(static_cast<std::uint32_t>(s));
    std::size_t found = 0;
    for (std::size_t hop = 0; hop < k && !frontier.empty(); ++hop) {
      next.clear();
      for (std::uint32_t u : frontier) {
        for (std::uint32_t v : g.neighbors(u)) {
          if (seen[v]) continue;
          seen[v] = 1;
          touched.push_back(v);
          next.push_back(v);
          ++found;
        }
      }
      std::swap(frontier, next);
    }
    census.reachable[s] = found;
    for (std::uint32_t u : touched) seen[u] = 0;
  }

  double total = 0.0;
  for (std::size_t c : census.reachable) total += static_cast<double>(c);
  census.avg_neighbors = n > 0 ? total / static_cast<double>(n) : 0.0;
  census.density = n > 1 ? census.avg_neighbors / static_cast<double>(n - 1) : 0.0;
  return census;
}

}  // namespace hosr
