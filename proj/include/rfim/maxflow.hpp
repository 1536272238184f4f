#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

namespace rfim {

/// Dinic max-flow on integer capacities.
///
/// Sized for lattice graphs: bounded degree, two terminals, a few thousand
/// nodes. Each instance owns its network; solves are not shared.
class MaxFlow {
 public:
  using Capacity = std::int64_t;

  explicit MaxFlow(std::size_t nodes) : adj_(nodes), level_(nodes), it_(nodes) {}

  [[nodiscard]] std::size_t nodes() const noexcept { return adj_.size(); }

  // Directed edge u -> v, plus the residual twin v -> u with capacity `back`.
  void add_edge(std::size_t u, std::size_t v, Capacity cap, Capacity back = 0) {
    adj_[u].push_back(edges_.size());
    edges_.push_back({v, cap});
    adj_[v].push_back(edges_.size());
    edges_.push_back({u, back});
  }

  Capacity solve(std::size_t s, std::size_t t) {
    Capacity flow = 0;
    while (bfs(s, t)) {
      std::fill(it_.begin(), it_.end(), 0);
      while (Capacity f = augment(s, t)) flow += f;
    }
    return flow;
  }

  // After solve(): nodes with a residual path to t.
  [[nodiscard]] std::vector<bool> reaches_sink(std::size_t t) const {
    std::vector<bool> seen(adj_.size(), false);
    std::vector<std::size_t> queue{t};
    seen[t] = true;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const std::size_t y = queue[q];
      for (std::size_t e : adj_[y]) {
        // e is y -> x; its twin x -> y carries the residual capacity we need.
        const std::size_t x = edges_[e].to;
        if (!seen[x] && edges_[e ^ 1].cap > 0) {
          seen[x] = true;
          queue.push_back(x);
        }
      }
    }
    return seen;
  }

 private:
  struct Edge {
    std::size_t to;
    Capacity cap;
  };

  bool bfs(std::size_t s, std::size_t t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::vector<std::size_t> queue{s};
    level_[s] = 0;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const std::size_t u = queue[q];
      for (std::size_t e : adj_[u]) {
        const Edge& ed = edges_[e];
        if (ed.cap > 0 && level_[ed.to] < 0) {
          level_[ed.to] = level_[u] + 1;
          queue.push_back(ed.to);
        }
      }
    }
    return level_[t] >= 0;
  }

  // One blocking-flow augmentation by iterative DFS along the level graph.
  Capacity augment(std::size_t s, std::size_t t) {
    std::vector<std::size_t> path;  // edge ids
    std::size_t u = s;
    for (;;) {
      if (u == t) {
        Capacity f = std::numeric_limits<Capacity>::max();
        for (std::size_t e : path) f = std::min(f, edges_[e].cap);
        for (std::size_t e : path) {
          edges_[e].cap -= f;
          edges_[e ^ 1].cap += f;
        }
        return f;
      }
      bool advanced = false;
      for (auto& k = it_[u]; k < adj_[u].size(); ++k) {
        const std::size_t e = adj_[u][k];
        const Edge& ed = edges_[e];
        if (ed.cap > 0 && level_[ed.to] == level_[u] + 1) {
          path.push_back(e);
          u = ed.to;
          advanced = true;
          break;
        }
      }
      if (!advanced) {
        if (u == s) return 0;
        level_[u] = -1;  // dead end
        const std::size_t e = path.back();
        path.pop_back();
        u = edges_[e ^ 1].to;
        ++it_[u];
      }
    }
  }

  std::vector<std::vector<std::size_t>> adj_;
  std::vector<Edge> edges_;
  std::vector<int> level_;
  std::vector<std::size_t> it_;
};

}  // namespace rfim
