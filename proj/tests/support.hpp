#pragma once

// Small fixtures and independent reference computations for the unit tests
// and the acceptance binary. Nothing here calls into the solvers it checks.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <vector>

#include "rfnet/rfnet.hpp"

namespace rfnet::testing {

inline Network two_point(double c = 1.0, double m0 = 1.0, double m1 = 1.0) {
  return Network({m0, m1}, {{0, 1, c}}, 0);
}

inline Network triangle() { return Network({1, 1, 1}, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}}, 0, {"a", "b", "c"}); }

inline Network star(std::size_t k) {
  std::vector<Network::Edge> e;
  for (Vertex v = 1; v <= k; ++v) e.push_back({0, v, 1.0});
  return Network(std::vector<double>(k + 1, 1.0), e, 0);
}

inline Network cycle(std::size_t n) {
  std::vector<Network::Edge> e;
  for (Vertex v = 0; v < n; ++v) e.push_back({v, (v + 1) % n, 1.0});
  return Network(std::vector<double>(n, 1.0), e, 0);
}

inline Eigen::MatrixXd laplacian(const Network& net) {
  const auto n = static_cast<Eigen::Index>(net.size());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : net.edges()) {
    const auto u = static_cast<Eigen::Index>(e.u), v = static_cast<Eigen::Index>(e.v);
    L(u, u) += e.conductance;
    L(v, v) += e.conductance;
    L(u, v) -= e.conductance;
    L(v, u) -= e.conductance;
  }
  return L;
}

/// R(x,y) = (e_x - e_y)^T L^+ (e_x - e_y) with the SVD pseudoinverse.
inline Eigen::MatrixXd pinv_resistance(const Network& net) {
  const Eigen::MatrixXd L = laplacian(net);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(L, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::VectorXd s = svd.singularValues();
  const double cut = 1e-12 * s(0);
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = s(i) > cut ? 1.0 / s(i) : 0.0;
  const Eigen::MatrixXd P = svd.matrixV() * s.asDiagonal() * svd.matrixU().transpose();
  const auto n = L.rows();
  Eigen::MatrixXd R(n, n);
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y) R(x, y) = P(x, x) + P(y, y) - 2 * P(x, y);
  return R;
}

/// Inverse of L restricted to rows and columns outside A, indexed by vertex (0 on A).
inline Eigen::MatrixXd dirichlet_inverse(const Network& net, const std::vector<Vertex>& A) {
  const auto n = static_cast<Eigen::Index>(net.size());
  std::vector<Eigen::Index> keep;
  for (Eigen::Index v = 0; v < n; ++v)
    if (std::find(A.begin(), A.end(), static_cast<Vertex>(v)) == A.end()) keep.push_back(v);
  const Eigen::MatrixXd L = laplacian(net);
  const auto k = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd D(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) D(i, j) = L(keep[i], keep[j]);
  const Eigen::MatrixXd G = D.fullPivLu().inverse();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) out(keep[i], keep[j]) = G(i, j);
  return out;
}

/// exp(tQ) through the symmetrization M^{1/2} Q M^{-1/2} and its eigenbasis.
inline Eigen::MatrixXd semigroup_eig(const Network& net, double t) {
  const auto n = static_cast<Eigen::Index>(net.size());
  const Eigen::MatrixXd L = laplacian(net);
  Eigen::VectorXd s(n);
  for (Eigen::Index i = 0; i < n; ++i) s(i) = std::sqrt(net.measure(static_cast<Vertex>(i)));
  const Eigen::MatrixXd S = -(s.cwiseInverse().asDiagonal() * L * s.cwiseInverse().asDiagonal());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const Eigen::VectorXd ex = (es.eigenvalues() * t).array().exp();
  const Eigen::MatrixXd E = es.eigenvectors() * ex.asDiagonal() * es.eigenvectors().transpose();
  return s.cwiseInverse().asDiagonal() * E * s.asDiagonal();
}

/// Edmonds-Karp on a dense capacity matrix.
inline double dense_maxflow(Eigen::MatrixXd cap, Eigen::Index s, Eigen::Index t) {
  const auto n = cap.rows();
  double flow = 0.0;
  while (true) {
    std::vector<Eigen::Index> prev(static_cast<std::size_t>(n), -1);
    prev[static_cast<std::size_t>(s)] = s;
    std::queue<Eigen::Index> q;
    q.push(s);
    while (!q.empty() && prev[static_cast<std::size_t>(t)] < 0) {
      auto u = q.front();
      q.pop();
      for (Eigen::Index v = 0; v < n; ++v)
        if (prev[static_cast<std::size_t>(v)] < 0 && cap(u, v) > 1e-15) {
          prev[static_cast<std::size_t>(v)] = u;
          q.push(v);
        }
    }
    if (prev[static_cast<std::size_t>(t)] < 0) return flow;
    double b = std::numeric_limits<double>::infinity();
    for (auto v = t; v != s; v = prev[static_cast<std::size_t>(v)]) b = std::min(b, cap(prev[static_cast<std::size_t>(v)], v));
    for (auto v = t; v != s; v = prev[static_cast<std::size_t>(v)]) {
      cap(prev[static_cast<std::size_t>(v)], v) -= b;
      cap(v, prev[static_cast<std::size_t>(v)]) += b;
    }
    flow += b;
  }
}

/// Surrogate value of one correspondence, recomputed from scratch.
inline double surrogate_value(const FiniteMMSpace& X, const FiniteMMSpace& Y, const Correspondence& C) {
  double dis = 0.0;
  for (auto [a, b] : C)
    for (auto [c, d] : C) dis = std::max(dis, std::abs(X.distance(a, c) - Y.distance(b, d)));
  const auto nx = static_cast<Eigen::Index>(X.size()), ny = static_cast<Eigen::Index>(Y.size());
  const Eigen::Index s = nx + ny, t = s + 1;
  Eigen::MatrixXd cap = Eigen::MatrixXd::Zero(t + 1, t + 1);
  for (Eigen::Index a = 0; a < nx; ++a) cap(s, a) = X.weights[static_cast<std::size_t>(a)];
  for (Eigen::Index b = 0; b < ny; ++b) cap(nx + b, t) = Y.weights[static_cast<std::size_t>(b)];
  for (auto [a, b] : C) cap(static_cast<Eigen::Index>(a), nx + static_cast<Eigen::Index>(b)) = 1e300;
  const double flow = dense_maxflow(cap, s, t);
  return 0.5 * dis + std::max(X.total_mass(), Y.total_mass()) - flow;
}

/// Minimum over every correspondence containing the root pair, by enumerating
/// all subsets of X x Y. Only for |X||Y| <= 16.
inline double brute_force_ghp(const FiniteMMSpace& X, const FiniteMMSpace& Y) {
  const std::size_t nx = X.size(), ny = Y.size(), m = nx * ny;
  double best = std::numeric_limits<double>::infinity();
  const std::size_t rootbit = X.root * ny + Y.root;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
    if (!((mask >> rootbit) & 1)) continue;
    std::vector<char> cx(nx, 0), cy(ny, 0);
    Correspondence C;
    for (std::size_t k = 0; k < m; ++k)
      if ((mask >> k) & 1) {
        C.emplace_back(k / ny, k % ny);
        cx[k / ny] = cy[k % ny] = 1;
      }
    if (std::count(cx.begin(), cx.end(), 0) || std::count(cy.begin(), cy.end(), 0)) continue;
    best = std::min(best, surrogate_value(X, Y, C));
  }
  return best;
}

/// Random finite metric space: shortest-path metric of random weights.
inline FiniteMMSpace random_space(std::size_t n, StreamRng& rng) {
  FiniteMMSpace X;
  const auto k = static_cast<Eigen::Index>(n);
  X.metric = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i + 1; j < k; ++j) X.metric(i, j) = X.metric(j, i) = 0.5 + 2.0 * rng.uniform();
  for (Eigen::Index c = 0; c < k; ++c)
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j) X.metric(i, j) = std::min(X.metric(i, j), X.metric(i, c) + X.metric(c, j));
  for (std::size_t i = 0; i < n; ++i) {
    X.ids.push_back("p" + std::to_string(i));
    X.weights.push_back(0.2 + rng.uniform());
  }
  X.root = static_cast<std::size_t>(rng.below(n));
  return X;
}

/// X with its points listed in the order `perm` (new point i is old perm[i]).
inline FiniteMMSpace permuted(const FiniteMMSpace& X, const std::vector<std::size_t>& perm) {
  FiniteMMSpace Y = X;
  const auto n = perm.size();
  for (std::size_t i = 0; i < n; ++i) {
    Y.ids[i] = X.ids[perm[i]] + "'";
    Y.weights[i] = X.weights[perm[i]];
    for (std::size_t j = 0; j < n; ++j)
      Y.metric(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = X.distance(perm[i], perm[j]);
    if (perm[i] == X.root) Y.root = i;
  }
  return Y;
}

}  // namespace rfnet::testing
