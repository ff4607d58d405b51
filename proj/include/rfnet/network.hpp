#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rfnet/error.hpp"

namespace rfnet {

using Vertex = std::size_t;

struct Neighbor {
  Vertex vertex;
  double conductance;
};

/// Finite weighted network: symmetric conductances, strictly positive speed
/// measure and a marked root. Immutable once built; the constructor rejects
/// anything that is not a connected network on at least two vertices.
class Network {
 public:
  struct Edge {
    Vertex u;
    Vertex v;
    double conductance;
  };

  Network(std::vector<double> measure, std::vector<Edge> edges, Vertex root,
          std::vector<std::string> labels = {})
      : measure_(std::move(measure)), root_(root), labels_(std::move(labels)) {
    const std::size_t n = measure_.size();
    if (n < 2) throw InvalidArgument("network needs at least two vertices");
    if (root_ >= n) throw InvalidArgument("root is not a vertex");
    if (!labels_.empty() && labels_.size() != n)
      throw InvalidArgument("label count does not match vertex count");
    for (double m : measure_)
      if (!(m > 0.0) || !std::isfinite(m)) throw InvalidArgument("measure weights must be positive and finite");

    edges_.reserve(edges.size());
    for (Edge e : edges) {
      if (e.u >= n || e.v >= n) throw InvalidArgument("edge endpoint is not a vertex");
      if (e.u == e.v) throw InvalidArgument("self-loops carry no conductance");
      if (!(e.conductance >= 0.0) || !std::isfinite(e.conductance))
        throw InvalidArgument("conductances must be non-negative and finite");
      if (e.conductance == 0.0) continue;
      if (e.u > e.v) std::swap(e.u, e.v);
      edges_.push_back(e);
    }
    std::sort(edges_.begin(), edges_.end(),
              [](const Edge& a, const Edge& b) { return a.u != b.u ? a.u < b.u : a.v < b.v; });
    for (std::size_t i = 1; i < edges_.size(); ++i)
      if (edges_[i].u == edges_[i - 1].u && edges_[i].v == edges_[i - 1].v)
        throw InvalidArgument("duplicate edge " + label(edges_[i].u) + " " + label(edges_[i].v));

    offsets_.assign(n + 1, 0);
    for (const Edge& e : edges_) {
      ++offsets_[e.u + 1];
      ++offsets_[e.v + 1];
    }
    for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] += offsets_[i];
    adjacency_.resize(offsets_[n]);
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (const Edge& e : edges_) {
      adjacency_[fill[e.u]++] = {e.v, e.conductance};
      adjacency_[fill[e.v]++] = {e.u, e.conductance};
    }
    degree_.assign(n, 0.0);
    for (Vertex x = 0; x < n; ++x) {
      auto first = adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[x]);
      auto last = adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[x + 1]);
      std::sort(first, last, [](const Neighbor& a, const Neighbor& b) { return a.vertex < b.vertex; });
      for (auto it = first; it != last; ++it) degree_[x] += it->conductance;
    }
    total_mass_ = 0.0;
    for (double m : measure_) total_mass_ += m;

    if (!labels_.empty()) {
      index_.reserve(n);
      for (Vertex x = 0; x < n; ++x) {
        if (labels_[x].empty() || labels_[x].find_first_of(" \t\n") != std::string::npos)
          throw InvalidArgument("vertex labels must be non-empty tokens");
        if (!index_.emplace(labels_[x], x).second) throw InvalidArgument("duplicate vertex label " + labels_[x]);
      }
    }
    check_connected();
  }

  std::size_t size() const { return measure_.size(); }
  Vertex root() const { return root_; }
  double measure(Vertex x) const { return measure_.at(x); }
  std::span<const double> measures() const { return measure_; }
  double total_mass() const { return total_mass_; }
  const std::vector<Edge>& edges() const { return edges_; }
  bool is_tree() const { return edges_.size() + 1 == size(); }

  std::span<const Neighbor> neighbors(Vertex x) const {
    return {adjacency_.data() + offsets_[x], offsets_[x + 1] - offsets_[x]};
  }

  /// Total conductance at x, i.e. the diagonal of the Laplacian.
  double degree(Vertex x) const { return degree_.at(x); }

  double conductance(Vertex x, Vertex y) const {
    auto nb = neighbors(x);
    auto it = std::lower_bound(nb.begin(), nb.end(), y,
                               [](const Neighbor& a, Vertex v) { return a.vertex < v; });
    return (it != nb.end() && it->vertex == y) ? it->conductance : 0.0;
  }

  bool has_labels() const { return !labels_.empty(); }

  std::string label(Vertex x) const { return labels_.empty() ? std::to_string(x) : labels_.at(x); }

  std::vector<std::string> labels() const {
    std::vector<std::string> out(size());
    for (Vertex x = 0; x < size(); ++x) out[x] = label(x);
    return out;
  }

  std::optional<Vertex> find(std::string_view name) const {
    if (labels_.empty()) {
      Vertex v = 0;
      auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), v);
      if (ec != std::errc() || ptr != name.data() + name.size() || v >= size()) return std::nullopt;
      return v;
    }
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  Vertex index_of(std::string_view name) const {
    auto v = find(name);
    if (!v) throw InvalidArgument("unknown vertex " + std::string(name));
    return *v;
  }

  Network with_root(Vertex r) const { return Network(measure_, edges_, r, labels_); }
  Network with_measure(std::vector<double> m) const { return Network(std::move(m), edges_, root_, labels_); }

 private:
  void check_connected() const {
    const std::size_t n = size();
    std::vector<char> seen(n, 0);
    std::vector<Vertex> stack{root_};
    seen[root_] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      Vertex x = stack.back();
      stack.pop_back();
      for (const Neighbor& nb : neighbors(x))
        if (!seen[nb.vertex]) {
          seen[nb.vertex] = 1;
          ++count;
          stack.push_back(nb.vertex);
        }
    }
    if (count != n)
      throw DisconnectedNetwork("network is disconnected: " + std::to_string(n - count) +
                                " vertices unreachable from the root (infinite resistance)");
  }

  std::vector<double> measure_;
  std::vector<Edge> edges_;
  Vertex root_;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, Vertex> index_;
  std::vector<std::size_t> offsets_;
  std::vector<Neighbor> adjacency_;
  std::vector<double> degree_;
  double total_mass_ = 0.0;
};

inline void check_vertex(const Network& net, Vertex x) {
  if (x >= net.size()) throw InvalidArgument("unknown vertex " + std::to_string(x));
}

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw InvalidArgument("not a number: " + std::string(s));
  return v;
}

// Text schema:
//   network v1
//   vertex <id> <mu>
//   edge <id> <id> <conductance>
//   root <id>
inline void write_network(std::ostream& os, const Network& net) {
  os << "network v1\n";
  for (Vertex x = 0; x < net.size(); ++x) os << "vertex " << net.label(x) << ' ' << format_double(net.measure(x)) << '\n';
  for (const auto& e : net.edges())
    os << "edge " << net.label(e.u) << ' ' << net.label(e.v) << ' ' << format_double(e.conductance) << '\n';
  os << "root " << net.label(net.root()) << '\n';
}

inline Network read_network(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(is, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  if (!next_line()) throw ParseError("empty input", lineno);
  {
    std::istringstream hs(line);
    std::string a, b, extra;
    hs >> a >> b;
    if (a != "network" || b != "v1" || (hs >> extra)) throw ParseError("expected header 'network v1'", lineno);
  }
  std::vector<std::string> labels;
  std::vector<double> measure;
  std::unordered_map<std::string, Vertex> index;
  std::vector<Network::Edge> edges;
  std::set<std::pair<Vertex, Vertex>> seen_edges;
  std::optional<Vertex> root;
  const auto lookup = [&](const std::string& id) {
    auto it = index.find(id);
    if (it == index.end()) throw ParseError("undeclared vertex " + id, lineno);
    return it->second;
  };
  while (next_line()) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    try {
      if (kind == "vertex") {
        if (tok.size() != 2) throw ParseError("vertex line needs <id> <mu>", lineno);
        if (!edges.empty() || root) throw ParseError("vertex lines must precede edges and root", lineno);
        if (!index.emplace(tok[0], labels.size()).second) throw ParseError("duplicate vertex " + tok[0], lineno);
        labels.push_back(tok[0]);
        measure.push_back(parse_double(tok[1]));
      } else if (kind == "edge") {
        if (tok.size() != 3) throw ParseError("edge line needs <id> <id> <conductance>", lineno);
        if (root) throw ParseError("edge lines must precede root", lineno);
        Vertex u = lookup(tok[0]), v = lookup(tok[1]);
        auto key = std::minmax(u, v);
        if (!seen_edges.insert({key.first, key.second}).second)
          throw ParseError("duplicate edge " + tok[0] + " " + tok[1], lineno);
        edges.push_back({u, v, parse_double(tok[2])});
      } else if (kind == "root") {
        if (tok.size() != 1) throw ParseError("root line needs <id>", lineno);
        if (root) throw ParseError("root declared twice", lineno);
        root = lookup(tok[0]);
      } else {
        throw ParseError("unknown record '" + kind + "'", lineno);
      }
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  if (!root) throw ParseError("missing root line", lineno);
  return Network(std::move(measure), std::move(edges), *root, std::move(labels));
}

}  // namespace rfnet
