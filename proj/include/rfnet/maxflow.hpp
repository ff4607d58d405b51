#pragma once

#include <algorithm>
#include <limits>
#include <queue>
#include <vector>

namespace rfnet {

/// Dinic's algorithm on real capacities. Small graphs only; the tolerance
/// treats residual capacities below eps as saturated.
class MaxFlow {
 public:
  explicit MaxFlow(std::size_t nodes, double eps = 1e-15) : graph_(nodes), eps_(eps) {}

  void add_edge(std::size_t from, std::size_t to, double capacity) {
    graph_[from].push_back({to, graph_[to].size(), capacity});
    graph_[to].push_back({from, graph_[from].size() - 1, 0.0});
  }

  double run(std::size_t source, std::size_t sink) {
    double flow = 0.0;
    while (bfs(source, sink)) {
      iter_.assign(graph_.size(), 0);
      for (double f; (f = dfs(source, sink, std::numeric_limits<double>::infinity())) > eps_;) flow += f;
    }
    return flow;
  }

 private:
  struct Arc {
    std::size_t to;
    std::size_t rev;
    double cap;
  };

  bool bfs(std::size_t s, std::size_t t) {
    level_.assign(graph_.size(), -1);
    std::queue<std::size_t> q;
    level_[s] = 0;
    q.push(s);
    while (!q.empty()) {
      auto v = q.front();
      q.pop();
      for (const Arc& a : graph_[v])
        if (a.cap > eps_ && level_[a.to] < 0) {
          level_[a.to] = level_[v] + 1;
          q.push(a.to);
        }
    }
    return level_[t] >= 0;
  }

  double dfs(std::size_t v, std::size_t t, double pushed) {
    if (v == t) return pushed;
    for (auto& i = iter_[v]; i < graph_[v].size(); ++i) {
      Arc& a = graph_[v][i];
      if (a.cap <= eps_ || level_[a.to] != level_[v] + 1) continue;
      const double d = dfs(a.to, t, std::min(pushed, a.cap));
      if (d > eps_) {
        a.cap -= d;
        graph_[a.to][a.rev].cap += d;
        return d;
      }
    }
    return 0.0;
  }

  std::vector<std::vector<Arc>> graph_;
  std::vector<int> level_;
  std::vector<std::size_t> iter_;
  double eps_;
};

}  // namespace rfnet
