#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <vector>

#include "rfnet/error.hpp"
#include "rfnet/network.hpp"

namespace rfnet::linalg {

using Dense = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Sparse = Eigen::SparseMatrix<double>;

/// Index map for a subset: position[x] is x's row in the subset, or -1.
struct Subset {
  std::vector<Vertex> members;
  std::vector<std::ptrdiff_t> position;

  Subset(std::size_t n, std::vector<Vertex> m) : members(std::move(m)), position(n, -1) {
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (members[i] >= n) throw InvalidArgument("vertex out of range");
      if (position[members[i]] != -1) throw InvalidArgument("repeated vertex in set");
      position[members[i]] = static_cast<std::ptrdiff_t>(i);
    }
  }

  static Subset from_mask(const std::vector<char>& mask) {
    std::vector<Vertex> m;
    for (Vertex x = 0; x < mask.size(); ++x)
      if (mask[x]) m.push_back(x);
    return Subset(mask.size(), std::move(m));
  }

  std::size_t size() const { return members.size(); }
  bool contains(Vertex x) const { return position[x] >= 0; }
};

inline Dense dense_laplacian(const Network& net) {
  const auto n = static_cast<Eigen::Index>(net.size());
  Dense L = Dense::Zero(n, n);
  for (const auto& e : net.edges()) {
    const auto u = static_cast<Eigen::Index>(e.u), v = static_cast<Eigen::Index>(e.v);
    L(u, v) -= e.conductance;
    L(v, u) -= e.conductance;
  }
  for (Eigen::Index x = 0; x < n; ++x) L(x, x) = net.degree(static_cast<Vertex>(x));
  return L;
}

/// Laplacian restricted to the rows and columns of `keep`. Conductance to
/// vertices outside `keep` stays on the diagonal, so this is the Dirichlet
/// Laplacian with the complement grounded.
inline Dense dense_dirichlet(const Network& net, const Subset& keep) {
  const auto m = static_cast<Eigen::Index>(keep.size());
  Dense L = Dense::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Vertex x = keep.members[static_cast<std::size_t>(i)];
    L(i, i) = net.degree(x);
    for (const auto& nb : net.neighbors(x)) {
      auto j = keep.position[nb.vertex];
      if (j >= 0) L(i, j) -= nb.conductance;
    }
  }
  return L;
}

inline Sparse sparse_dirichlet(const Network& net, const Subset& keep) {
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const Vertex x = keep.members[i];
    t.emplace_back(static_cast<int>(i), static_cast<int>(i), net.degree(x));
    for (const auto& nb : net.neighbors(x)) {
      auto j = keep.position[nb.vertex];
      if (j >= 0) t.emplace_back(static_cast<int>(i), static_cast<int>(j), -nb.conductance);
    }
  }
  Sparse L(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(keep.size()));
  L.setFromTriplets(t.begin(), t.end());
  return L;
}

/// Sparse Cholesky of a Dirichlet Laplacian; positive definite whenever the
/// complement of the kept set is nonempty and the network connected.
class DirichletSolver {
 public:
  DirichletSolver(const Network& net, const Subset& keep) : matrix_(sparse_dirichlet(net, keep)) {
    solver_.compute(matrix_);
    if (solver_.info() != Eigen::Success) throw Error("Dirichlet Laplacian factorization failed");
  }

  Vec solve(const Vec& b) const {
    Vec x = solver_.solve(b);
    if (solver_.info() != Eigen::Success) throw Error("Dirichlet Laplacian solve failed");
    return x;
  }

  Dense solve(const Dense& b) const { return solver_.solve(b); }

  const Sparse& matrix() const { return matrix_; }

 private:
  Sparse matrix_;
  Eigen::SimplicialLDLT<Sparse> solver_;
};

inline Subset all_but(std::size_t n, const std::vector<char>& excluded) {
  std::vector<Vertex> m;
  for (Vertex x = 0; x < n; ++x)
    if (!excluded[x]) m.push_back(x);
  return Subset(n, std::move(m));
}

inline std::vector<char> mask_of(std::size_t n, std::span<const Vertex> set) {
  std::vector<char> mask(n, 0);
  for (Vertex x : set) {
    if (x >= n) throw InvalidArgument("unknown vertex " + std::to_string(x));
    mask[x] = 1;
  }
  return mask;
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
inline Dense spd_inverse(const Dense& A) {
  Eigen::LLT<Dense> llt(A);
  if (llt.info() != Eigen::Success) throw Error("matrix is not positive definite");
  return llt.solve(Dense::Identity(A.rows(), A.cols()));
}

}  // namespace rfnet::linalg
