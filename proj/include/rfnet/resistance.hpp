#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rfnet/error.hpp"
#include "rfnet/linalg.hpp"
#include "rfnet/network.hpp"

namespace rfnet {

inline constexpr double kInfiniteResistance = std::numeric_limits<double>::infinity();

/// Pairwise effective resistances on a labelled point set.
struct ResistanceMatrix {
  std::vector<std::string> labels;
  linalg::Dense values;

  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  /// Throws unless the matrix is a metric: zero diagonal, symmetric,
  /// positive off-diagonal, triangle inequality up to `tol`.
  void validate(double tol = 1e-9) const {
    const auto n = values.rows();
    if (values.cols() != n) throw InvalidArgument("resistance matrix must be square");
    if (!labels.empty() && labels.size() != static_cast<std::size_t>(n))
      throw InvalidArgument("label count does not match matrix size");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(values(i, i)) > tol) throw InvalidArgument("resistance matrix diagonal must vanish");
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!std::isfinite(values(i, j))) throw InvalidArgument("resistance entries must be finite");
        if (std::abs(values(i, j) - values(j, i)) > tol) throw InvalidArgument("resistance matrix is not symmetric");
        if (i != j && !(values(i, j) > 0.0)) throw InvalidArgument("off-diagonal resistances must be positive");
        for (Eigen::Index k = 0; k < n; ++k)
          if (values(i, k) > values(i, j) + values(j, k) + tol)
            throw InvalidArgument("resistance matrix violates the triangle inequality");
      }
    }
  }
};

namespace detail {

inline double energy_between(const Network& net, const std::vector<char>& inA, const std::vector<char>& inB) {
  const std::size_t n = net.size();
  std::vector<char> fixed(n, 0);
  bool anyA = false, anyB = false;
  for (Vertex x = 0; x < n; ++x) {
    if (inA[x] && inB[x]) throw InvalidArgument("sets must be disjoint");
    fixed[x] = inA[x] || inB[x];
    anyA = anyA || inA[x];
    anyB = anyB || inB[x];
  }
  if (!anyA || !anyB) throw InvalidArgument("sets must be nonempty");

  // Potential 1 on A, 0 on B, harmonic elsewhere; the energy is the current out of A.
  linalg::Subset interior = linalg::all_but(n, fixed);
  linalg::Vec u;
  if (interior.size() > 0) {
    linalg::Vec b = linalg::Vec::Zero(static_cast<Eigen::Index>(interior.size()));
    for (std::size_t i = 0; i < interior.size(); ++i)
      for (const auto& nb : net.neighbors(interior.members[i]))
        if (inA[nb.vertex]) b(static_cast<Eigen::Index>(i)) += nb.conductance;
    linalg::DirichletSolver solver(net, interior);
    u = solver.solve(b);
  }
  double energy = 0.0;
  for (Vertex a = 0; a < n; ++a) {
    if (!inA[a]) continue;
    for (const auto& nb : net.neighbors(a)) {
      if (inA[nb.vertex]) continue;
      const auto pos = interior.size() > 0 ? interior.position[nb.vertex] : -1;
      const double uw = pos >= 0 ? u(pos) : 0.0;
      energy += nb.conductance * (1.0 - uw);
    }
  }
  return energy;
}

/// Tree distances in the resistance metric: sums of 1/c along the unique path.
inline std::vector<double> tree_resistances_from(const Network& net, Vertex source) {
  std::vector<double> dist(net.size(), -1.0);
  std::vector<Vertex> stack{source};
  dist[source] = 0.0;
  while (!stack.empty()) {
    Vertex x = stack.back();
    stack.pop_back();
    for (const auto& nb : net.neighbors(x))
      if (dist[nb.vertex] < 0.0) {
        dist[nb.vertex] = dist[x] + 1.0 / nb.conductance;
        stack.push_back(nb.vertex);
      }
  }
  return dist;
}

inline constexpr std::size_t kDenseLimit = 3000;

}  // namespace detail

/// Two-point effective resistance R(x, y), via a grounded Laplacian solve.
inline double effective_resistance(const Network& net, Vertex x, Vertex y) {
  check_vertex(net, x);
  check_vertex(net, y);
  if (x == y) return 0.0;
  std::vector<char> grounded(net.size(), 0);
  grounded[y] = 1;
  linalg::Subset keep = linalg::all_but(net.size(), grounded);
  linalg::DirichletSolver solver(net, keep);
  linalg::Vec e = linalg::Vec::Zero(static_cast<Eigen::Index>(keep.size()));
  e(keep.position[x]) = 1.0;
  return solver.solve(e)(keep.position[x]);
}

/// All pairwise resistances, R = G_xx + G_yy - 2 G_xy with G the inverse of the
/// Laplacian grounded at the root.
inline ResistanceMatrix resistance_matrix(const Network& net) {
  const std::size_t n = net.size();
  if (n > detail::kDenseLimit) throw InvalidArgument("network too large for a dense resistance matrix");
  std::vector<char> grounded(n, 0);
  grounded[net.root()] = 1;
  linalg::Subset keep = linalg::all_but(n, grounded);
  linalg::Dense G = linalg::spd_inverse(linalg::dense_dirichlet(net, keep));
  auto g = [&](Vertex a, Vertex b) {
    const auto i = keep.position[a], j = keep.position[b];
    return (i < 0 || j < 0) ? 0.0 : G(i, j);
  };
  ResistanceMatrix R{net.labels(), linalg::Dense::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};
  for (Vertex x = 0; x < n; ++x)
    for (Vertex y = x + 1; y < n; ++y) {
      const double r = g(x, x) + g(y, y) - 2.0 * g(x, y);
      R.values(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = r;
      R.values(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)) = r;
    }
  return R;
}

/// R(source, x) for every vertex x.
inline std::vector<double> resistances_from(const Network& net, Vertex source) {
  check_vertex(net, source);
  if (net.is_tree()) return detail::tree_resistances_from(net, source);
  const std::size_t n = net.size();
  std::vector<char> grounded(n, 0);
  grounded[source] = 1;
  linalg::Subset keep = linalg::all_but(n, grounded);
  std::vector<double> out(n, 0.0);
  if (n <= detail::kDenseLimit) {
    linalg::Dense G = linalg::spd_inverse(linalg::dense_dirichlet(net, keep));
    for (std::size_t i = 0; i < keep.size(); ++i)
      out[keep.members[i]] = G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    return out;
  }
  // R(source, x) is the diagonal of the grounded inverse; one solve per vertex.
  linalg::DirichletSolver solver(net, keep);
  linalg::Vec e = linalg::Vec::Zero(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    e(static_cast<Eigen::Index>(i)) = 1.0;
    out[keep.members[i]] = solver.solve(e)(static_cast<Eigen::Index>(i));
    e(static_cast<Eigen::Index>(i)) = 0.0;
  }
  return out;
}

/// Effective resistance between disjoint nonempty vertex sets, each fused to a point.
inline double set_resistance(const Network& net, std::span<const Vertex> A, std::span<const Vertex> B) {
  if (A.empty() || B.empty()) throw InvalidArgument("set_resistance needs nonempty sets");
  auto inA = linalg::mask_of(net.size(), A);
  auto inB = linalg::mask_of(net.size(), B);
  return 1.0 / detail::energy_between(net, inA, inB);
}

inline double set_resistance_masks(const Network& net, const std::vector<char>& inA, const std::vector<char>& inB) {
  return 1.0 / detail::energy_between(net, inA, inB);
}

/// Quotient network with projection map: vertex x of the input becomes
/// vertex `projection[x]` of `net`.
struct FusedNetwork {
  Network net;
  std::vector<Vertex> projection;
};

/// Identify each part to a single vertex. Conductances between classes add,
/// edges inside a part vanish, and the measure of a class is the sum over
/// its members.
inline FusedNetwork fuse_network(const Network& net, const std::vector<std::vector<Vertex>>& parts) {
  const std::size_t n = net.size();
  std::vector<std::ptrdiff_t> part_of(n, -1);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    if (parts[p].empty()) throw InvalidArgument("fuse parts must be nonempty");
    for (Vertex x : parts[p]) {
      check_vertex(net, x);
      if (part_of[x] != -1) throw InvalidArgument("fuse parts overlap at vertex " + net.label(x));
      part_of[x] = static_cast<std::ptrdiff_t>(p);
    }
  }
  std::vector<Vertex> projection(n);
  std::vector<std::ptrdiff_t> part_image(parts.size(), -1);
  std::vector<double> measure;
  std::vector<std::string> labels;
  for (Vertex x = 0; x < n; ++x) {
    const auto p = part_of[x];
    if (p >= 0 && part_image[p] >= 0) {
      projection[x] = static_cast<Vertex>(part_image[p]);
      measure[projection[x]] += net.measure(x);
      continue;
    }
    projection[x] = measure.size();
    measure.push_back(net.measure(x));
    if (p >= 0) {
      part_image[p] = static_cast<std::ptrdiff_t>(projection[x]);
      std::string name;
      for (Vertex m : parts[p]) name += (name.empty() ? "" : "+") + net.label(m);
      labels.push_back(name);
    } else {
      labels.push_back(net.label(x));
    }
  }
  std::map<std::pair<Vertex, Vertex>, double> sums;
  for (const auto& e : net.edges()) {
    Vertex a = projection[e.u], b = projection[e.v];
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    sums[{a, b}] += e.conductance;
  }
  std::vector<Network::Edge> edges;
  edges.reserve(sums.size());
  for (const auto& [key, c] : sums) edges.push_back({key.first, key.second, c});
  bool plain = true;
  for (Vertex i = 0; i < labels.size() && plain; ++i) plain = labels[i] == std::to_string(i);
  if (plain) labels.clear();
  Network out(std::move(measure), std::move(edges), projection[net.root()], std::move(labels));
  return {std::move(out), std::move(projection)};
}

/// R_A(y, z): resistance between y and z after fusing A to a point.
inline double fused_resistance(const Network& net, std::span<const Vertex> A, Vertex y, Vertex z) {
  if (A.empty()) throw InvalidArgument("fused_resistance needs a nonempty set");
  auto inA = linalg::mask_of(net.size(), A);
  check_vertex(net, y);
  check_vertex(net, z);
  if (inA[y] || inA[z]) throw InvalidArgument("y and z must lie outside the fused set");
  if (y == z) return 0.0;
  auto fused = fuse_network(net, {std::vector<Vertex>(A.begin(), A.end())});
  return effective_resistance(fused.net, fused.projection[y], fused.projection[z]);
}

/// Schur complement of the Laplacian onto V: the trace network, carrying
/// measure nu on V. Effective resistances among V are unchanged.
inline Network trace_network(const Network& net, std::span<const Vertex> V, std::span<const double> nu,
                             std::optional<Vertex> new_root = std::nullopt) {
  if (V.empty()) throw InvalidArgument("trace onto an empty set");
  if (nu.size() != V.size()) throw InvalidArgument("trace measure must give one weight per kept vertex");
  for (double w : nu)
    if (!(w > 0.0)) throw InvalidArgument("trace measure must be strictly positive");
  const std::size_t n = net.size();
  linalg::Subset kept(n, std::vector<Vertex>(V.begin(), V.end()));
  Vertex root_vertex = net.root();
  if (new_root) root_vertex = *new_root;
  if (root_vertex >= n || !kept.contains(root_vertex))
    throw InvalidArgument("trace set must contain the root or a designated new root");

  std::vector<char> in_v(n, 0);
  for (Vertex x : V) in_v[x] = 1;
  linalg::Subset hidden = linalg::all_but(n, in_v);
  const auto k = static_cast<Eigen::Index>(kept.size());

  linalg::Dense S = linalg::dense_dirichlet(net, kept);
  if (hidden.size() > 0) {
    const auto h = static_cast<Eigen::Index>(hidden.size());
    linalg::Dense B = linalg::Dense::Zero(h, k);
    for (Eigen::Index i = 0; i < h; ++i)
      for (const auto& nb : net.neighbors(hidden.members[static_cast<std::size_t>(i)])) {
        auto j = kept.position[nb.vertex];
        if (j >= 0) B(i, j) = -nb.conductance;
      }
    linalg::DirichletSolver solver(net, hidden);
    linalg::Dense X = solver.solve(B);
    S.noalias() -= B.transpose() * X;
  }
  double scale = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) scale = std::max(scale, std::abs(S(i, i)));
  std::vector<Network::Edge> edges;
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i + 1; j < k; ++j) {
      const double c = -0.5 * (S(i, j) + S(j, i));
      if (c <= 1e-13 * scale) {
        if (c < -1e-9 * scale) throw Error("trace produced a negative conductance");
        continue;
      }
      edges.push_back({static_cast<Vertex>(i), static_cast<Vertex>(j), c});
    }
  std::vector<std::string> labels;
  if (net.has_labels() || !std::is_sorted(V.begin(), V.end()) || V.size() != n) {
    for (Vertex x : V) labels.push_back(net.label(x));
  }
  return Network(std::vector<double>(nu.begin(), nu.end()), std::move(edges),
                 static_cast<Vertex>(kept.position[root_vertex]), std::move(labels));
}

/// Open resistance ball B(center, r) = {x : R(center, x) < r}, as a mask.
inline std::vector<char> open_ball_mask(const std::vector<double>& dist, double r) {
  std::vector<char> m(dist.size(), 0);
  for (std::size_t i = 0; i < dist.size(); ++i) m[i] = dist[i] < r;
  return m;
}

inline std::vector<char> closed_ball_mask(const std::vector<double>& dist, double r) {
  std::vector<char> m(dist.size(), 0);
  for (std::size_t i = 0; i < dist.size(); ++i) m[i] = dist[i] <= r;
  return m;
}

/// R(rho, B(rho, r)^c) for the open resistance ball; +inf when the
/// complement is empty.
inline double ball_complement_resistance(const Network& net, Vertex rho, double r) {
  check_vertex(net, rho);
  if (!(r > 0.0)) throw InvalidArgument("ball radius must be positive");
  const auto dist = resistances_from(net, rho);
  std::vector<char> inA(net.size(), 0), inB(net.size(), 0);
  inA[rho] = 1;
  bool any = false;
  for (Vertex x = 0; x < net.size(); ++x) {
    inB[x] = !(dist[x] < r);
    any = any || inB[x];
  }
  if (!any) return kInfiniteResistance;
  return set_resistance_masks(net, inA, inB);
}

/// Result of reconstructing conductances from a resistance matrix.
struct Reconstruction {
  Network net;
  std::vector<std::string> warnings;
};

/// Recover the unique network whose effective resistances are R. Builds the
/// Gram-type matrix M(x,y) = (R(b,x) + R(b,y) - R(x,y)) / 2 about the base b,
/// whose inverse is the Laplacian grounded at b.
inline Reconstruction resistance_to_network(const ResistanceMatrix& R, std::size_t base,
                                            std::vector<double> measure = {}) {
  const std::size_t n = R.size();
  if (n < 2) throw InvalidArgument("resistance matrix needs at least two points");
  if (base >= n) throw InvalidArgument("base point out of range");
  R.validate();
  if (measure.empty()) measure.assign(n, 1.0);
  if (measure.size() != n) throw InvalidArgument("measure size does not match matrix");

  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < n; ++i)
    if (i != base) others.push_back(i);
  const auto m = static_cast<Eigen::Index>(others.size());
  linalg::Dense M(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      const std::size_t x = others[static_cast<std::size_t>(i)], y = others[static_cast<std::size_t>(j)];
      M(i, j) = 0.5 * (R(base, x) + R(base, y) - R(x, y));
    }
  Eigen::LDLT<linalg::Dense> ldlt(M);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff()))
    throw NotRealizable("resistance Gram matrix is singular or indefinite");
  linalg::Dense L = ldlt.solve(linalg::Dense::Identity(m, m));

  std::vector<std::vector<double>> c(n, std::vector<double>(n, 0.0));
  double scale = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const std::size_t x = others[static_cast<std::size_t>(i)];
    double row = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      row += L(i, j);
      if (i != j) c[x][others[static_cast<std::size_t>(j)]] = -0.5 * (L(i, j) + L(j, i));
    }
    c[x][base] = c[base][x] = row;
    scale = std::max(scale, L(i, i));
  }

  std::vector<std::string> warnings;
  std::vector<Network::Edge> edges;
  const double noise_floor = 1e-12 * scale;
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = x + 1; y < n; ++y) {
      double v = c[x][y];
      if (v < -1e-8) {
        throw NotRealizable("reconstructed conductance " + format_double(v) + " between points " +
                            std::to_string(x) + " and " + std::to_string(y) + " is negative");
      }
      if (v < 0.0) {
        if (v < -noise_floor)
          warnings.push_back("clamped conductance " + format_double(v) + " between points " + std::to_string(x) +
                             " and " + std::to_string(y) + " to zero");
        continue;
      }
      if (v <= noise_floor) continue;
      edges.push_back({x, y, v});
    }
  std::vector<std::string> labels = R.labels;
  bool plain = true;
  for (std::size_t i = 0; i < labels.size() && plain; ++i) plain = labels[i] == std::to_string(i);
  if (plain) labels.clear();
  return {Network(std::move(measure), std::move(edges), base, std::move(labels)), std::move(warnings)};
}

inline void write_csv(std::ostream& os, const std::vector<std::string>& labels, const linalg::Dense& M) {
  for (std::size_t i = 0; i < labels.size(); ++i) os << (i ? "," : "") << labels[i];
  os << '\n';
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) os << (j ? "," : "") << format_double(M(i, j));
    os << '\n';
  }
}

}  // namespace rfnet
