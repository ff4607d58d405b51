#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rfnet/error.hpp"
#include "rfnet/linalg.hpp"
#include "rfnet/network.hpp"
#include "rfnet/resistance.hpp"
#include "rfnet/rng.hpp"

namespace rfnet {

enum class Figure1Variant { linear, sqrt };

/// Path 0..n with unit edges plus k extra leaves hung on 0 by resistance-n
/// edges, k = n (linear) or floor(sqrt n) (sqrt). mu = 1, root 0.
inline Network figure1_family(std::size_t n, Figure1Variant variant) {
  if (n < 1) throw InvalidArgument("figure-1 family needs n >= 1");
  std::size_t k = n;
  if (variant == Figure1Variant::sqrt) {
    k = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
    while ((k + 1) * (k + 1) <= n) ++k;
    while (k * k > n) --k;
  }
  std::vector<Network::Edge> edges;
  edges.reserve(n + k);
  for (Vertex i = 0; i < n; ++i) edges.push_back({i, i + 1, 1.0});
  const double c = 1.0 / static_cast<double>(n);
  for (std::size_t a = 0; a < k; ++a) edges.push_back({0, n + 1 + a, c});
  return Network(std::vector<double>(n + 1 + k, 1.0), std::move(edges), 0);
}

enum class OffspringLaw { geometric, poisson, binary };

inline OffspringLaw parse_offspring_law(std::string_view s) {
  if (s == "geom" || s == "geometric") return OffspringLaw::geometric;
  if (s == "poisson" || s == "poi") return OffspringLaw::poisson;
  if (s == "binary") return OffspringLaw::binary;
  throw InvalidArgument("unsupported offspring law '" + std::string(s) + "' (geom, poisson, binary)");
}

/// Parent of every vertex (preorder labels, parent[0] unused) of a tree
/// coded by its offspring counts in depth-first order.
inline std::vector<Vertex> parents_from_offspring(const std::vector<std::uint64_t>& xi) {
  std::vector<Vertex> parent(xi.size(), 0);
  std::vector<std::pair<Vertex, std::uint64_t>> stack{{0, xi[0]}};
  for (Vertex v = 1; v < xi.size(); ++v) {
    while (stack.back().second == 0) stack.pop_back();
    parent[v] = stack.back().first;
    --stack.back().second;
    stack.push_back({v, xi[v]});
  }
  return parent;
}

/// Critical Galton-Watson tree conditioned on exactly N vertices. Offspring
/// counts are drawn i.i.d. and accepted when they sum to N-1; the cycle lemma
/// then rotates the sequence into a valid depth-first code, which makes the
/// output uniform under the conditioned law.
inline Network gw_tree_conditioned(OffspringLaw law, std::size_t N, std::uint64_t seed,
                                   std::size_t max_attempts = 1'000'000) {
  if (N < 2) throw InvalidArgument("conditioned tree needs at least two vertices");
  if (law == OffspringLaw::binary && N % 2 == 0)
    throw InvalidArgument("binary offspring law only produces trees of odd size");
  StreamRng rng(seed, 0x67770);
  std::vector<std::uint64_t> xi(N);
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    std::uint64_t total = 0;
    bool over = false;
    for (auto& x : xi) {
      switch (law) {
        case OffspringLaw::geometric: x = rng.geometric(0.5); break;
        case OffspringLaw::poisson: x = rng.poisson(1.0); break;
        case OffspringLaw::binary: x = rng.bernoulli(0.5) ? 2 : 0; break;
      }
      total += x;
      if (total > N - 1) {
        over = true;
        break;
      }
    }
    if (over || total != N - 1) continue;
    // Rotate to start just after the first minimum of the walk sum (xi - 1).
    std::int64_t walk = 0, low = 0;
    std::size_t argmin = 0;
    for (std::size_t i = 0; i < N; ++i) {
      walk += static_cast<std::int64_t>(xi[i]) - 1;
      if (walk < low) {
        low = walk;
        argmin = i + 1;
      }
    }
    std::rotate(xi.begin(), xi.begin() + static_cast<std::ptrdiff_t>(argmin % N), xi.end());
    const auto parent = parents_from_offspring(xi);
    std::vector<Network::Edge> edges;
    edges.reserve(N - 1);
    for (Vertex v = 1; v < N; ++v) edges.push_back({parent[v], v, 1.0});
    return Network(std::vector<double>(N, 1.0), std::move(edges), 0);
  }
  throw BudgetExhausted("conditioned tree rejection sampling exhausted " + std::to_string(max_attempts) +
                        " attempts; retry with another seed or a larger budget");
}

/// Largest component of G(n, p), p = 1/n + lambda n^{-4/3}.
struct ErComponent {
  Network net;
  std::size_t surplus = 0;
  /// Endpoints of the non-tree edges, in component labels.
  std::vector<std::pair<Vertex, Vertex>> surplus_pairs;
  /// Original vertex id of each component vertex.
  std::vector<std::size_t> original;
  double p = 0.0;
};

namespace detail {
struct DisjointSets {
  std::vector<std::size_t> parent, size;
  explicit DisjointSets(std::size_t n) : parent(n), size(n, 1) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size[a] < size[b]) std::swap(a, b);
    parent[b] = a;
    size[a] += size[b];
    return true;
  }
};
}  // namespace detail

inline ErComponent critical_er_graph(std::size_t n, double lambda, std::uint64_t seed) {
  if (n < 2) throw InvalidArgument("random graph needs n >= 2");
  const double nd = static_cast<double>(n);
  const double p = std::clamp(1.0 / nd + lambda * std::pow(nd, -4.0 / 3.0), 0.0, 1.0);
  StreamRng rng(seed, 0xe7d05);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  if (p > 0.0) {
    // Walk the pairs (i, j), i < j, in lexicographic order with geometric gaps.
    std::size_t i = 0, j = 0;
    std::uint64_t skip = rng.geometric(p);
    j = 1;
    for (;;) {
      while (skip > 0 && i + 1 < n) {
        const std::uint64_t room = n - j;
        if (skip < room) {
          j += skip;
          skip = 0;
        } else {
          skip -= room;
          ++i;
          j = i + 1;
        }
      }
      if (i + 1 >= n) break;
      edges.emplace_back(i, j);
      skip = rng.geometric(p) + 1;
    }
  }
  detail::DisjointSets ds(n);
  for (auto [a, b] : edges) ds.unite(a, b);
  std::size_t best = ds.find(0);
  for (std::size_t v = 0; v < n; ++v) {
    const std::size_t r = ds.find(v);
    if (ds.size[r] > ds.size[best]) best = r;
  }
  if (ds.size[best] < 2) throw Error("largest component is a single vertex; no edge was retained");
  ErComponent out{Network({1.0, 1.0}, {{0, 1, 1.0}}, 0), 0, {}, {}, p};
  std::vector<std::ptrdiff_t> label(n, -1);
  for (std::size_t v = 0; v < n; ++v)
    if (ds.find(v) == best) {
      label[v] = static_cast<std::ptrdiff_t>(out.original.size());
      out.original.push_back(v);
    }
  std::vector<Network::Edge> comp_edges;
  detail::DisjointSets tree(out.original.size());
  for (auto [a, b] : edges)
    if (label[a] >= 0) {
      const auto u = static_cast<Vertex>(label[a]), w = static_cast<Vertex>(label[b]);
      comp_edges.push_back({u, w, 1.0});
      if (!tree.unite(u, w)) out.surplus_pairs.emplace_back(u, w);
    }
  out.surplus = comp_edges.size() + 1 - out.original.size();
  out.net = Network(std::vector<double>(out.original.size(), 1.0), std::move(comp_edges), 0);
  return out;
}

struct CutTime {
  std::size_t time;
  Vertex point;
  /// Cut property only verified against the finite future window.
  bool horizon_censored = true;
};

struct RangeGraph {
  Network net;
  std::vector<CutTime> cut_times;
  /// Vertex of S_n for each n.
  std::vector<Vertex> trajectory;
  /// Lattice coordinates of each vertex.
  std::vector<std::vector<int>> coordinates;
  bool low_dimension = false;
};

/// Trace graph of a simple random walk on Z^d run for `steps` steps. An
/// increment is (axis, sign) with sign in {-1, +1}; tests may inject them.
inline RangeGraph srw_range_graph(std::size_t d, std::size_t steps, std::uint64_t seed,
                                  const std::vector<std::pair<std::size_t, int>>* injected = nullptr) {
  if (d < 1) throw InvalidArgument("dimension must be at least 1");
  if (steps < 1) throw InvalidArgument("walk needs at least one step");
  if (injected && injected->size() < steps) throw InvalidArgument("too few injected increments");
  RangeGraph g{Network({1.0, 1.0}, {{0, 1, 1.0}}, 0), {}, {}, {}, d < 5};
  StreamRng rng(seed, 0x5e11);
  std::map<std::vector<int>, Vertex> index;
  std::vector<int> pos(d, 0);
  index.emplace(pos, 0);
  g.coordinates.push_back(pos);
  g.trajectory.push_back(0);
  std::vector<std::pair<Vertex, Vertex>> edge_list;
  for (std::size_t s = 0; s < steps; ++s) {
    std::size_t axis;
    int sign;
    if (injected) {
      std::tie(axis, sign) = (*injected)[s];
      if (axis >= d || (sign != 1 && sign != -1)) throw InvalidArgument("invalid injected increment");
    } else {
      const auto k = rng.below(2 * d);
      axis = static_cast<std::size_t>(k / 2);
      sign = k % 2 ? 1 : -1;
    }
    pos[axis] += sign;
    auto [it, fresh] = index.emplace(pos, g.coordinates.size());
    if (fresh) g.coordinates.push_back(pos);
    const Vertex prev = g.trajectory.back();
    g.trajectory.push_back(it->second);
    edge_list.emplace_back(std::min(prev, it->second), std::max(prev, it->second));
  }
  std::sort(edge_list.begin(), edge_list.end());
  edge_list.erase(std::unique(edge_list.begin(), edge_list.end()), edge_list.end());
  std::vector<Network::Edge> edges;
  for (auto [a, b] : edge_list) edges.push_back({a, b, 1.0});
  g.net = Network(std::vector<double>(g.coordinates.size(), 1.0), std::move(edges), 0);

  // n is a cut time iff no point of S[0, n] is visited after n.
  std::vector<std::size_t> last(g.coordinates.size(), 0);
  for (std::size_t t = 0; t <= steps; ++t) last[g.trajectory[t]] = t;
  std::size_t reach = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    reach = std::max(reach, last[g.trajectory[t]]);
    if (reach <= t) g.cut_times.push_back({t, g.trajectory[t], true});
  }
  return g;
}

/// Per-cut-time quantities: T_k, R(0, C_k), d_graph(0, C_k) and the number
/// of distinct points in S[0, T_k].
struct CutTimeRow {
  std::size_t k;
  std::size_t time;
  double resistance;
  std::size_t graph_distance;
  std::size_t range_size;
};

inline std::vector<CutTimeRow> cut_time_analytics(const RangeGraph& g) {
  const Network& net = g.net;
  const std::size_t n = net.size();
  std::vector<std::size_t> dist(n, static_cast<std::size_t>(-1));
  {
    std::vector<Vertex> queue{net.root()};
    dist[net.root()] = 0;
    for (std::size_t h = 0; h < queue.size(); ++h)
      for (const auto& nb : net.neighbors(queue[h]))
        if (dist[nb.vertex] == static_cast<std::size_t>(-1)) {
          dist[nb.vertex] = dist[queue[h]] + 1;
          queue.push_back(nb.vertex);
        }
  }
  std::vector<CutTimeRow> rows;
  std::vector<char> seen(n, 0);
  std::size_t distinct = 0, t_prev = 0;
  double resistance = 0.0;
  for (std::size_t k = 0; k < g.cut_times.size(); ++k) {
    const std::size_t T = g.cut_times[k].time;
    // Block between consecutive cut points: the points visited during [t_prev, T].
    std::vector<Vertex> block;
    std::vector<char> in_block(n, 0);
    for (std::size_t t = t_prev; t <= T; ++t) {
      const Vertex v = g.trajectory[t];
      if (!in_block[v]) {
        in_block[v] = 1;
        block.push_back(v);
      }
      if (!seen[v]) {
        seen[v] = 1;
        ++distinct;
      }
    }
    const Vertex a = g.trajectory[t_prev], b = g.trajectory[T];
    if (a != b) {
      std::sort(block.begin(), block.end());
      std::vector<std::ptrdiff_t> local(n, -1);
      for (std::size_t i = 0; i < block.size(); ++i) local[block[i]] = static_cast<std::ptrdiff_t>(i);
      std::vector<Network::Edge> edges;
      for (Vertex v : block)
        for (const auto& nb : net.neighbors(v))
          if (nb.vertex > v && local[nb.vertex] >= 0)
            edges.push_back({static_cast<Vertex>(local[v]), static_cast<Vertex>(local[nb.vertex]), nb.conductance});
      Network piece(std::vector<double>(block.size(), 1.0), std::move(edges), 0);
      resistance += effective_resistance(piece, static_cast<Vertex>(local[a]), static_cast<Vertex>(local[b]));
    }
    rows.push_back({k + 1, T, resistance, dist[b], distinct});
    t_prev = T;
  }
  return rows;
}

/// Level-k Sierpinski gasket graph; corner (0,0) is vertex 0 and the root.
inline constexpr std::size_t kGasketMaxLevel = 10;

inline Network gasket_graph(std::size_t level) {
  if (level > kGasketMaxLevel)
    throw InvalidArgument("gasket level " + std::to_string(level) + " exceeds the memory cap " +
                          std::to_string(kGasketMaxLevel));
  using P = std::pair<long, long>;
  std::map<P, Vertex> index;
  std::vector<Network::Edge> edges;
  auto id = [&](P p) { return index.emplace(p, index.size()).first->second; };
  id({0, 0});
  const long side = 1L << level;
  id({side, 0});
  id({0, side});
  auto build = [&](auto&& self, P a, long s, std::size_t depth) -> void {
    const P b{a.first + s, a.second}, c{a.first, a.second + s};
    if (depth == 0) {
      const Vertex ia = id(a), ib = id(b), ic = id(c);
      edges.push_back({ia, ib, 1.0});
      edges.push_back({ib, ic, 1.0});
      edges.push_back({ic, ia, 1.0});
      return;
    }
    const long h = s / 2;
    self(self, a, h, depth - 1);
    self(self, P{a.first + h, a.second}, h, depth - 1);
    self(self, P{a.first, a.second + h}, h, depth - 1);
  };
  build(build, {0, 0}, side, level);
  return Network(std::vector<double>(index.size(), 1.0), std::move(edges), 0);
}

/// Corner vertices of gasket_graph(level): (0,0), (2^k,0), (0,2^k).
inline std::array<Vertex, 3> gasket_corners() { return {0, 1, 2}; }

/// Random connected network for property tests: a random recursive tree
/// plus extra edges, log-uniform conductances and measure weights.
inline Network random_network(std::size_t n, std::uint64_t seed, double extra_edge_probability = 0.2,
                              double spread = 4.0) {
  if (n < 2) throw InvalidArgument("network needs at least two vertices");
  StreamRng rng(seed, 0x4a9d);
  auto weight = [&] { return std::exp((rng.uniform() * 2.0 - 1.0) * std::log(spread)); };
  std::vector<Network::Edge> edges;
  std::vector<std::vector<char>> used(n, std::vector<char>(n, 0));
  for (Vertex v = 1; v < n; ++v) {
    const auto u = static_cast<Vertex>(rng.below(v));
    edges.push_back({u, v, weight()});
    used[u][v] = used[v][u] = 1;
  }
  for (Vertex u = 0; u < n; ++u)
    for (Vertex v = u + 1; v < n; ++v)
      if (!used[u][v] && rng.bernoulli(extra_edge_probability)) edges.push_back({u, v, weight()});
  std::vector<double> mu(n);
  for (auto& m : mu) m = weight();
  return Network(std::move(mu), std::move(edges), static_cast<Vertex>(rng.below(n)));
}

/// Unit path 0 - 1 - ... - n, mu = 1, root 0.
inline Network unit_path(std::size_t n) {
  if (n < 1) throw InvalidArgument("path needs at least one edge");
  std::vector<Network::Edge> edges;
  for (Vertex i = 0; i < n; ++i) edges.push_back({i, i + 1, 1.0});
  return Network(std::vector<double>(n + 1, 1.0), std::move(edges), 0);
}

/// A generated network together with the parameters that produced it.
struct Ensemble {
  std::string family;
  std::map<std::string, std::string> params;
  Network net;
  std::vector<std::pair<Vertex, Vertex>> marked_pairs;
};

namespace detail {
inline std::map<std::string, std::string> parse_params(std::string_view body) {
  std::map<std::string, std::string> out;
  while (!body.empty()) {
    const auto comma = body.find(',');
    const auto item = body.substr(0, comma);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0) throw InvalidArgument("malformed parameter '" + std::string(item) + "'");
    if (!out.emplace(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1))).second)
      throw InvalidArgument("repeated parameter '" + std::string(item.substr(0, eq)) + "'");
    if (comma == std::string_view::npos) break;
    body.remove_prefix(comma + 1);
  }
  return out;
}

class ParamReader {
 public:
  explicit ParamReader(std::map<std::string, std::string> p) : p_(std::move(p)) {}

  std::optional<std::string> text(const std::string& k) {
    auto it = p_.find(k);
    if (it == p_.end()) return std::nullopt;
    used_.push_back(k);
    return it->second;
  }
  std::string required(const std::string& k) {
    auto v = text(k);
    if (!v) throw InvalidArgument("missing parameter '" + k + "'");
    return *v;
  }
  std::uint64_t integer(const std::string& k, std::optional<std::uint64_t> fallback = std::nullopt) {
    auto v = text(k);
    if (!v) {
      if (fallback) return *fallback;
      throw InvalidArgument("missing parameter '" + k + "'");
    }
    std::uint64_t x = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
    if (ec != std::errc() || ptr != v->data() + v->size()) throw InvalidArgument("parameter '" + k + "' is not an integer");
    return x;
  }
  double real(const std::string& k, std::optional<double> fallback = std::nullopt) {
    auto v = text(k);
    if (!v) {
      if (fallback) return *fallback;
      throw InvalidArgument("missing parameter '" + k + "'");
    }
    return parse_double(*v);
  }
  void finish() const {
    for (const auto& [k, v] : p_)
      if (std::find(used_.begin(), used_.end(), k) == used_.end()) throw InvalidArgument("unknown parameter '" + k + "'");
  }
  const std::map<std::string, std::string>& all() const { return p_; }

 private:
  std::map<std::string, std::string> p_;
  std::vector<std::string> used_;
};
}  // namespace detail

/// Builds a network from a spec string such as `fig1:n=1000,variant=sqrt`,
/// `gw:law=geom,size=500,seed=7`, `er:n=10000,lambda=0,seed=3`,
/// `range:d=5,steps=100000,seed=11`, `gasket:level=6`, `path:n=20` or
/// `random:n=12,seed=4`.
inline Ensemble make_ensemble(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string family(spec.substr(0, colon));
  detail::ParamReader r(colon == std::string_view::npos ? std::map<std::string, std::string>{}
                                                         : detail::parse_params(spec.substr(colon + 1)));
  auto done = [&](Network net, std::vector<std::pair<Vertex, Vertex>> pairs = {}) {
    r.finish();
    return Ensemble{family, r.all(), std::move(net), std::move(pairs)};
  };
  if (family == "fig1") {
    const auto n = r.integer("n");
    const auto variant = r.text("variant").value_or("linear");
    if (variant != "linear" && variant != "sqrt") throw InvalidArgument("fig1 variant must be linear or sqrt");
    return done(figure1_family(n, variant == "sqrt" ? Figure1Variant::sqrt : Figure1Variant::linear));
  }
  if (family == "gw") {
    const auto law = parse_offspring_law(r.text("law").value_or("geom"));
    const auto size = r.integer("size");
    const auto seed = r.integer("seed");
    return done(gw_tree_conditioned(law, size, seed));
  }
  if (family == "er") {
    const auto n = r.integer("n");
    const double lambda = r.real("lambda", 0.0);
    const auto seed = r.integer("seed");
    auto comp = critical_er_graph(n, lambda, seed);
    return done(std::move(comp.net), std::move(comp.surplus_pairs));
  }
  if (family == "range") {
    const auto d = r.integer("d", 5);
    const auto steps = r.integer("steps");
    const auto seed = r.integer("seed");
    return done(srw_range_graph(d, steps, seed).net);
  }
  if (family == "gasket") return done(gasket_graph(r.integer("level")));
  if (family == "path") return done(unit_path(r.integer("n")));
  if (family == "random") {
    const auto n = r.integer("n");
    const auto seed = r.integer("seed");
    const double p = r.real("p", 0.2);
    return done(random_network(n, seed, p));
  }
  throw InvalidArgument("unknown ensemble family '" + family + "' (fig1, gw, er, range, gasket, path, random)");
}

}  // namespace rfnet
