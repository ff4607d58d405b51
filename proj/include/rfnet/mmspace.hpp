#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rfnet/error.hpp"
#include "rfnet/linalg.hpp"
#include "rfnet/maxflow.hpp"
#include "rfnet/network.hpp"
#include "rfnet/resistance.hpp"
#include "rfnet/rng.hpp"
#include "rfnet/stats.hpp"

namespace rfnet {

/// Finite rooted metric measure space, optionally carrying a map into a
/// Euclidean host space (one row of coordinates per point).
struct FiniteMMSpace {
  std::vector<std::string> ids;
  linalg::Dense metric;
  std::vector<double> weights;
  std::size_t root = 0;
  std::optional<linalg::Dense> embedding;

  std::size_t size() const { return weights.size(); }
  double total_mass() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }
  double distance(std::size_t a, std::size_t b) const {
    return metric(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  }

  /// Throws unless the metric axioms hold up to a relative tolerance.
  void validate(double tol = 1e-9) const {
    const std::size_t n = size();
    if (n == 0) throw InvalidArgument("space has no points");
    if (ids.size() != n || metric.rows() != static_cast<Eigen::Index>(n) || metric.cols() != metric.rows())
      throw InvalidArgument("space shape mismatch");
    if (root >= n) throw InvalidArgument("root is not a point");
    for (double w : weights)
      if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("weights must be nonnegative and finite");
    if (!(total_mass() > 0.0)) throw InvalidArgument("total mass must be positive");
    if (embedding && embedding->rows() != static_cast<Eigen::Index>(n))
      throw InvalidArgument("embedding must cover every point");
    const double scale = std::max(1.0, metric.cwiseAbs().maxCoeff());
    for (std::size_t a = 0; a < n; ++a) {
      if (std::abs(distance(a, a)) > tol * scale) throw InvalidArgument("metric diagonal must vanish");
      for (std::size_t b = 0; b < n; ++b) {
        const double d = distance(a, b);
        if (!std::isfinite(d) || d < 0.0) throw InvalidArgument("metric entries must be finite and nonnegative");
        if (std::abs(d - distance(b, a)) > tol * scale) throw InvalidArgument("metric is not symmetric");
        if (a != b && d <= 0.0) throw InvalidArgument("distinct points at distance zero");
        for (std::size_t c = 0; c < n; ++c)
          if (d > distance(a, c) + distance(c, b) + tol * scale) throw InvalidArgument("triangle inequality fails");
      }
    }
  }
};

using Correspondence = std::vector<std::pair<std::size_t, std::size_t>>;

inline FiniteMMSpace from_network(const Network& net) {
  const ResistanceMatrix R = resistance_matrix(net);
  FiniteMMSpace s;
  s.ids = net.labels();
  s.metric = R.values;
  s.weights.assign(net.measures().begin(), net.measures().end());
  s.root = net.root();
  return s;
}

/// Keeps the points indexed by `keep`, in that order.
inline FiniteMMSpace subspace(const FiniteMMSpace& X, const std::vector<std::size_t>& keep) {
  FiniteMMSpace s;
  const auto k = static_cast<Eigen::Index>(keep.size());
  s.metric.resize(k, k);
  std::optional<std::size_t> root;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    s.ids.push_back(X.ids.at(keep[i]));
    s.weights.push_back(X.weights.at(keep[i]));
    if (keep[i] == X.root) root = i;
    for (std::size_t j = 0; j < keep.size(); ++j)
      s.metric(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = X.distance(keep[i], keep[j]);
  }
  if (!root) throw InvalidArgument("subspace must keep the root");
  s.root = *root;
  if (X.embedding) {
    linalg::Dense e(k, X.embedding->cols());
    for (std::size_t i = 0; i < keep.size(); ++i) e.row(static_cast<Eigen::Index>(i)) = X.embedding->row(static_cast<Eigen::Index>(keep[i]));
    s.embedding = std::move(e);
  }
  return s;
}

/// Closed ball of radius r around the root.
inline FiniteMMSpace restrict_ball(const FiniteMMSpace& X, double r) {
  if (!(r >= 0.0)) throw InvalidArgument("ball radius must be nonnegative");
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < X.size(); ++i)
    if (X.distance(X.root, i) <= r) keep.push_back(i);
  return subspace(X, keep);
}

/// Points whose distance to the root is within tol of r; the restriction is
/// sensitive to r there.
inline std::vector<std::string> ball_boundary_ties(const FiniteMMSpace& X, double r, double tol = 1e-12) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < X.size(); ++i)
    if (std::abs(X.distance(X.root, i) - r) <= tol * std::max(1.0, r)) out.push_back(X.ids[i]);
  return out;
}

/// Multiplies distances, masses and host coordinates by the given factors.
inline FiniteMMSpace rescaled(FiniteMMSpace X, double metric_factor, double mass_factor, double embedding_factor = 1.0) {
  if (!(metric_factor > 0.0) || !(mass_factor > 0.0)) throw InvalidArgument("scale factors must be positive");
  X.metric *= metric_factor;
  for (double& w : X.weights) w *= mass_factor;
  if (X.embedding) *X.embedding *= embedding_factor;
  return X;
}

inline void validate_correspondence(const FiniteMMSpace& X, const FiniteMMSpace& Y, const Correspondence& C) {
  std::vector<char> cx(X.size(), 0), cy(Y.size(), 0);
  bool rooted = false;
  for (auto [a, b] : C) {
    if (a >= X.size() || b >= Y.size()) throw InvalidArgument("correspondence refers to a missing point");
    cx[a] = cy[b] = 1;
    rooted = rooted || (a == X.root && b == Y.root);
  }
  if (std::find(cx.begin(), cx.end(), 0) != cx.end() || std::find(cy.begin(), cy.end(), 0) != cy.end())
    throw InvalidArgument("correspondence must cover both spaces");
  if (!rooted) throw InvalidArgument("correspondence must contain the root pair");
}

inline double distortion(const FiniteMMSpace& X, const FiniteMMSpace& Y, const Correspondence& C) {
  double d = 0.0;
  for (std::size_t i = 0; i < C.size(); ++i)
    for (std::size_t j = i + 1; j < C.size(); ++j)
      d = std::max(d, std::abs(X.distance(C[i].first, C[j].first) - Y.distance(C[i].second, C[j].second)));
  return d;
}

/// Mass that cannot be transported along the pairs of C:
/// max(mu(X), nu(Y)) minus the maximal flow supported on C.
inline double coupling_defect(const FiniteMMSpace& X, const FiniteMMSpace& Y, const Correspondence& C) {
  const std::size_t nx = X.size(), ny = Y.size();
  MaxFlow flow(nx + ny + 2);
  const std::size_t s = nx + ny, t = s + 1;
  for (std::size_t a = 0; a < nx; ++a) flow.add_edge(s, a, X.weights[a]);
  for (std::size_t b = 0; b < ny; ++b) flow.add_edge(nx + b, t, Y.weights[b]);
  const double big = X.total_mass() + Y.total_mass();
  for (auto [a, b] : C) flow.add_edge(a, nx + b, big);
  const double top = std::max(X.total_mass(), Y.total_mass());
  const double defect = top - flow.run(s, t);
  // flow and mass sums are accumulated in different orders; drop the rounding residue
  return defect <= 1e-12 * top ? 0.0 : defect;
}

/// Correspondence surrogate for the rooted Gromov-Hausdorff-Prohorov
/// distance: half the distortion plus the coupling defect. The root pair is
/// required, so no separate root term appears.
inline double ghp_upper(const FiniteMMSpace& X, const FiniteMMSpace& Y, const Correspondence& C) {
  validate_correspondence(X, Y, C);
  return 0.5 * distortion(X, Y, C) + coupling_defect(X, Y, C);
}

struct GhpResult {
  double value = std::numeric_limits<double>::infinity();
  Correspondence best;
  bool exact = false;
};

inline constexpr std::size_t kExhaustiveLimit = 6;

namespace detail {

inline bool space_less(const FiniteMMSpace& X, const FiniteMMSpace& Y) {
  if (X.size() != Y.size()) return X.size() < Y.size();
  if (X.root != Y.root) return X.root < Y.root;
  if (X.weights != Y.weights) return X.weights < Y.weights;
  const auto* a = X.metric.data();
  const auto* b = Y.metric.data();
  return std::lexicographical_compare(a, a + X.metric.size(), b, b + Y.metric.size());
}

inline Correspondence transposed(Correspondence C) {
  for (auto& p : C) std::swap(p.first, p.second);
  std::sort(C.begin(), C.end());
  return C;
}

/// Exact minimum over rooted correspondences. For every candidate
/// distortion level D, the correspondences with distortion <= D are the
/// cliques of a compatibility graph on X x Y; the coupling defect only
/// decreases when pairs are added, so maximal cliques suffice.
inline GhpResult ghp_exhaustive(const FiniteMMSpace& X, const FiniteMMSpace& Y) {
  const std::size_t nx = X.size(), ny = Y.size(), np = nx * ny;
  auto gap = [&](std::size_t p, std::size_t q) {
    return std::abs(X.distance(p / ny, q / ny) - Y.distance(p % ny, q % ny));
  };
  std::vector<double> levels{0.0};
  for (std::size_t p = 0; p < np; ++p)
    for (std::size_t q = p + 1; q < np; ++q) levels.push_back(gap(p, q));
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  const std::size_t root_pair = X.root * ny + Y.root;
  GhpResult best;
  best.exact = true;
  using Mask = std::uint64_t;
  std::vector<Mask> adj(np);
  for (double D : levels) {
    if (0.5 * D >= best.value) break;
    for (std::size_t p = 0; p < np; ++p) {
      adj[p] = 0;
      for (std::size_t q = 0; q < np; ++q)
        if (q != p && gap(p, q) <= D) adj[p] |= Mask{1} << q;
    }
    const Mask start = adj[root_pair];
    auto visit = [&](Mask clique) {
      Correspondence C;
      std::vector<char> cx(nx, 0), cy(ny, 0);
      for (std::size_t p = 0; p < np; ++p)
        if (clique >> p & 1) {
          C.emplace_back(p / ny, p % ny);
          cx[p / ny] = cy[p % ny] = 1;
        }
      if (std::find(cx.begin(), cx.end(), 0) != cx.end() || std::find(cy.begin(), cy.end(), 0) != cy.end()) return;
      const double v = 0.5 * distortion(X, Y, C) + coupling_defect(X, Y, C);
      if (v < best.value || (v == best.value && C < best.best)) {
        best.value = v;
        best.best = std::move(C);
      }
    };
    // Bron-Kerbosch with pivoting, seeded with the root pair.
    std::function<void(Mask, Mask, Mask)> bk = [&](Mask R, Mask P, Mask Xs) {
      if (!P && !Xs) {
        visit(R);
        return;
      }
      const Mask PX = P | Xs;
      std::size_t pivot = static_cast<std::size_t>(__builtin_ctzll(PX));
      int most = -1;
      for (Mask m = PX; m; m &= m - 1) {
        const auto u = static_cast<std::size_t>(__builtin_ctzll(m));
        const int c = __builtin_popcountll(P & adj[u]);
        if (c > most) {
          most = c;
          pivot = u;
        }
      }
      for (Mask m = P & ~adj[pivot]; m; m &= m - 1) {
        const auto v = static_cast<std::size_t>(__builtin_ctzll(m));
        const Mask bit = Mask{1} << v;
        bk(R | bit, P & adj[v], Xs & adj[v]);
        P &= ~bit;
        Xs |= bit;
      }
    };
    bk(Mask{1} << root_pair, start, 0);
  }
  return best;
}

inline Correspondence rank_matching(const FiniteMMSpace& X, const FiniteMMSpace& Y) {
  auto order = [](const FiniteMMSpace& S) {
    std::vector<std::size_t> idx(S.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return S.distance(S.root, a) < S.distance(S.root, b); });
    return idx;
  };
  const auto ox = order(X), oy = order(Y);
  Correspondence C;
  for (std::size_t i = 0; i < ox.size(); ++i) C.emplace_back(ox[i], oy[i * oy.size() / ox.size()]);
  for (std::size_t j = 0; j < oy.size(); ++j) C.emplace_back(ox[j * ox.size() / oy.size()], oy[j]);
  C.emplace_back(X.root, Y.root);
  std::sort(C.begin(), C.end());
  C.erase(std::unique(C.begin(), C.end()), C.end());
  return C;
}

/// Each point's partner list, rebuilt into a correspondence.
struct PartnerMap {
  std::vector<std::size_t> x_to_y;
  std::vector<std::size_t> y_to_x;

  Correspondence build(std::size_t xr, std::size_t yr) const {
    Correspondence C;
    for (std::size_t a = 0; a < x_to_y.size(); ++a) C.emplace_back(a, x_to_y[a]);
    for (std::size_t b = 0; b < y_to_x.size(); ++b) C.emplace_back(y_to_x[b], b);
    C.emplace_back(xr, yr);
    std::sort(C.begin(), C.end());
    C.erase(std::unique(C.begin(), C.end()), C.end());
    return C;
  }
};

inline GhpResult ghp_heuristic(const FiniteMMSpace& X, const FiniteMMSpace& Y, std::size_t budget,
                               std::uint64_t seed) {
  const std::size_t nx = X.size(), ny = Y.size();
  // Start from the rank matching: partner of a is the y of equal distance rank.
  PartnerMap cur;
  cur.x_to_y.assign(nx, Y.root);
  cur.y_to_x.assign(ny, X.root);
  for (auto [a, b] : rank_matching(X, Y)) {
    cur.x_to_y[a] = b;
    cur.y_to_x[b] = a;
  }
  auto score = [&](const PartnerMap& m) {
    const auto C = m.build(X.root, Y.root);
    return std::make_pair(0.5 * distortion(X, Y, C) + coupling_defect(X, Y, C), C);
  };
  auto [value, C] = score(cur);
  GhpResult best{value, C, false};
  StreamRng rng(seed, 0x9b5);
  for (std::size_t it = 1; it < budget; ++it) {
    PartnerMap next = cur;
    if (rng.bernoulli(0.5)) {
      const auto a = static_cast<std::size_t>(rng.below(nx));
      // Prefer partners at a similar distance from the root.
      const double target = X.distance(X.root, a);
      std::size_t b = static_cast<std::size_t>(rng.below(ny));
      for (int k = 0; k < 3; ++k) {
        const auto c = static_cast<std::size_t>(rng.below(ny));
        if (std::abs(Y.distance(Y.root, c) - target) < std::abs(Y.distance(Y.root, b) - target)) b = c;
      }
      next.x_to_y[a] = b;
    } else {
      const auto b = static_cast<std::size_t>(rng.below(ny));
      const double target = Y.distance(Y.root, b);
      std::size_t a = static_cast<std::size_t>(rng.below(nx));
      for (int k = 0; k < 3; ++k) {
        const auto c = static_cast<std::size_t>(rng.below(nx));
        if (std::abs(X.distance(X.root, c) - target) < std::abs(X.distance(X.root, a) - target)) a = c;
      }
      next.y_to_x[b] = a;
    }
    auto [v, Cn] = score(next);
    if (v <= value) {
      cur = std::move(next);
      value = v;
      if (v < best.value) {
        best.value = v;
        best.best = std::move(Cn);
      }
    }
  }
  return best;
}

}  // namespace detail

/// Minimizes the surrogate over rooted correspondences: exactly when both
/// spaces have at most six points, otherwise by seeded local search (an
/// upper bound, never worse with a larger budget).
inline GhpResult ghp_search(const FiniteMMSpace& X, const FiniteMMSpace& Y, std::size_t budget = 200,
                            std::uint64_t seed = 1) {
  if (budget < 1) throw InvalidArgument("search budget must be at least 1");
  X.validate();
  Y.validate();
  if (detail::space_less(Y, X)) {
    GhpResult r = ghp_search(Y, X, budget, seed);
    r.best = detail::transposed(std::move(r.best));
    return r;
  }
  if (X.size() <= kExhaustiveLimit && Y.size() <= kExhaustiveLimit) return detail::ghp_exhaustive(X, Y);
  return detail::ghp_heuristic(X, Y, budget, seed);
}

/// Prohorov distance between finite measures on a common host metric, given
/// the host distances between their support points. Bisection over the
/// sorted candidate radii; feasibility at eps is a max-flow check.
inline double prohorov_distance(std::span<const double> p, std::span<const double> q, const linalg::Dense& host) {
  if (host.rows() != static_cast<Eigen::Index>(p.size()) || host.cols() != static_cast<Eigen::Index>(q.size()))
    throw InvalidArgument("host distance matrix shape mismatch");
  const double mp = std::accumulate(p.begin(), p.end(), 0.0);
  const double mq = std::accumulate(q.begin(), q.end(), 0.0);
  const double total = std::max(mp, mq);
  auto flow_at = [&](double eps) {
    MaxFlow f(p.size() + q.size() + 2);
    const std::size_t s = p.size() + q.size(), t = s + 1;
    for (std::size_t i = 0; i < p.size(); ++i) f.add_edge(s, i, p[i]);
    for (std::size_t j = 0; j < q.size(); ++j) f.add_edge(p.size() + j, t, q[j]);
    for (std::size_t i = 0; i < p.size(); ++i)
      for (std::size_t j = 0; j < q.size(); ++j)
        if (host(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <= eps) f.add_edge(i, p.size() + j, mp + mq);
    return f.run(s, t);
  };
  std::vector<double> radii{0.0};
  for (Eigen::Index i = 0; i < host.size(); ++i) radii.push_back(host.data()[i]);
  std::sort(radii.begin(), radii.end());
  radii.erase(std::unique(radii.begin(), radii.end()), radii.end());
  // On [r_k, r_{k+1}) the flow is constant, so the optimum is
  // min_k max(r_k, total - F(r_k)); the first term grows and the second shrinks.
  std::size_t lo = 0, hi = radii.size() - 1;
  std::vector<double> cache(radii.size(), -1.0);
  auto deficit = [&](std::size_t k) {
    if (cache[k] < 0.0) cache[k] = std::max(0.0, total - flow_at(radii[k]));
    return cache[k];
  };
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (radii[mid] >= deficit(mid)) hi = mid;
    else lo = mid + 1;
  }
  double best = std::max(radii[lo], deficit(lo));
  if (lo > 0) best = std::min(best, std::max(radii[lo - 1], deficit(lo - 1)));
  return std::min(best, total);
}

struct SpatialDiscrepancy {
  double metric_part = 0.0;
  double embedding_part = 0.0;
};

inline linalg::Dense host_distances(const linalg::Dense& A, const linalg::Dense& B) {
  linalg::Dense D(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < B.rows(); ++j) D(i, j) = (A.row(i) - B.row(j)).norm();
  return D;
}

/// Metric part: the surrogate of C. Embedding part: the larger of the sup
/// host displacement over C and the Prohorov distance of the image measures.
inline SpatialDiscrepancy spatial_discrepancy(const FiniteMMSpace& X, const FiniteMMSpace& Y, const Correspondence& C) {
  if (!X.embedding || !Y.embedding) throw InvalidArgument("both spaces need embeddings");
  if (X.embedding->cols() != Y.embedding->cols()) throw InvalidArgument("embeddings live in different host spaces");
  SpatialDiscrepancy out;
  out.metric_part = ghp_upper(X, Y, C);
  const linalg::Dense D = host_distances(*X.embedding, *Y.embedding);
  for (auto [a, b] : C) out.embedding_part = std::max(out.embedding_part, D(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
  out.embedding_part = std::max(out.embedding_part, prohorov_distance(X.weights, Y.weights, D));
  return out;
}

struct MomentEstimate {
  stats::Estimate estimate;
  bool exact = false;
};

/// Integral of f over the pairwise distances of (root, x_1, ..., x_K), the
/// x_k drawn independently from the normalized weights. Distances are passed
/// as d(x_i, x_j) for i < j in lexicographic order, x_0 being the root.
inline MomentEstimate gromov_weak_moment(const FiniteMMSpace& X, std::size_t K,
                                         const std::function<double(std::span<const double>)>& f,
                                         std::size_t samples, std::uint64_t seed, std::uint64_t stream = 0) {
  if (K < 1) throw InvalidArgument("moment order must be at least 1");
  const double mass = X.total_mass();
  if (!(mass > 0.0)) throw InvalidArgument("zero total mass");
  const std::size_t n = X.size();
  std::vector<std::size_t> tuple(K + 1, X.root);
  std::vector<double> dists(K * (K + 1) / 2);
  auto eval = [&] {
    std::size_t k = 0;
    for (std::size_t i = 0; i <= K; ++i)
      for (std::size_t j = i + 1; j <= K; ++j) dists[k++] = X.distance(tuple[i], tuple[j]);
    return f(dists);
  };
  double cells = 1.0;
  for (std::size_t k = 0; k < K; ++k) cells *= static_cast<double>(n);
  MomentEstimate out;
  if (cells <= 1e6) {
    double acc = 0.0;
    std::vector<std::size_t> idx(K, 0);
    for (;;) {
      double w = 1.0;
      for (std::size_t k = 0; k < K; ++k) {
        tuple[k + 1] = idx[k];
        w *= X.weights[idx[k]] / mass;
      }
      if (w > 0.0) acc += w * eval();
      std::size_t k = 0;
      while (k < K && ++idx[k] == n) idx[k++] = 0;
      if (k == K) break;
    }
    out.estimate = {acc, 0.0, static_cast<std::size_t>(cells)};
    out.exact = true;
    return out;
  }
  if (samples == 0) throw InvalidArgument("sample count must be positive");
  std::vector<double> cum(n);
  std::partial_sum(X.weights.begin(), X.weights.end(), cum.begin());
  StreamRng rng(seed, stream);
  std::vector<double> vals(samples);
  for (auto& v : vals) {
    for (std::size_t k = 1; k <= K; ++k) {
      const double u = rng.uniform() * cum.back();
      auto it = std::upper_bound(cum.begin(), cum.end(), u);
      if (it == cum.end()) --it;
      tuple[k] = static_cast<std::size_t>(it - cum.begin());
    }
    v = eval();
  }
  out.estimate = stats::mean_estimate(vals);
  return out;
}

/// Table of R_n(rho_n, B(rho_n, r)^c) plus the max-over-n proxy for the
/// growth limit. `growth_fails` is set when the proxy flattens: its log-log
/// slope over the upper half of the radii is below 0.25.
struct GrowthProfile {
  std::vector<std::string> names;
  std::vector<double> radii;
  std::vector<std::vector<double>> values;
  std::vector<double> proxy;
  double upper_slope = 0.0;
  bool growth_fails = false;
};

inline GrowthProfile resistance_growth_profile(const std::vector<std::pair<std::string, const Network*>>& nets,
                                               const std::vector<double>& radii, std::size_t first = 0) {
  if (radii.empty()) throw InvalidArgument("radii grid is empty");
  for (std::size_t j = 0; j < radii.size(); ++j)
    if (!(radii[j] > 0.0) || (j > 0 && !(radii[j] > radii[j - 1])))
      throw InvalidArgument("radii must be positive and strictly increasing");
  GrowthProfile g;
  g.radii = radii;
  for (const auto& [name, net] : nets) {
    g.names.push_back(name);
    std::vector<double> row;
    for (double r : radii) row.push_back(ball_complement_resistance(*net, net->root(), r));
    g.values.push_back(std::move(row));
  }
  g.proxy.assign(radii.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = first; i < g.values.size(); ++i)
    for (std::size_t j = 0; j < radii.size(); ++j)
      if (std::isfinite(g.values[i][j])) g.proxy[j] = std::max(g.proxy[j], g.values[i][j]);
  std::vector<double> lx, ly;
  for (std::size_t j = radii.size() / 2; j < radii.size(); ++j)
    if (std::isfinite(g.proxy[j]) && g.proxy[j] > 0.0) {
      lx.push_back(std::log(radii[j]));
      ly.push_back(std::log(g.proxy[j]));
    }
  if (lx.size() >= 2) {
    g.upper_slope = stats::fit_line(lx, ly).slope;
    g.growth_fails = g.upper_slope < 0.25;
  }
  return g;
}

inline void write_profile_csv(std::ostream& os, const GrowthProfile& g) {
  os << "n,r,value\n";
  for (std::size_t i = 0; i < g.values.size(); ++i)
    for (std::size_t j = 0; j < g.radii.size(); ++j)
      os << g.names[i] << ',' << format_double(g.radii[j]) << ',' << format_double(g.values[i][j]) << '\n';
}

// Text schema:
//   mmspace v1
//   point <id> <mass> [<coords>...]
//   dist <id> <id> <value>      one line per unordered pair
//   root <id>
inline void write_mmspace(std::ostream& os, const FiniteMMSpace& X) {
  os << "mmspace v1\n";
  for (std::size_t i = 0; i < X.size(); ++i) {
    os << "point " << X.ids[i] << ' ' << format_double(X.weights[i]);
    if (X.embedding)
      for (Eigen::Index c = 0; c < X.embedding->cols(); ++c)
        os << ' ' << format_double((*X.embedding)(static_cast<Eigen::Index>(i), c));
    os << '\n';
  }
  for (std::size_t i = 0; i < X.size(); ++i)
    for (std::size_t j = i + 1; j < X.size(); ++j)
      os << "dist " << X.ids[i] << ' ' << X.ids[j] << ' ' << format_double(X.distance(i, j)) << '\n';
  os << "root " << X.ids[X.root] << '\n';
}

inline FiniteMMSpace read_mmspace(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(is, line)) {
      ++lineno;
      if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  if (!next_line() || line.find("mmspace v1") == std::string::npos) throw ParseError("expected header 'mmspace v1'", lineno);
  FiniteMMSpace X;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<double>> coords;
  std::vector<std::tuple<std::size_t, std::size_t, double>> dists;
  std::optional<std::size_t> root;
  while (next_line()) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    try {
      if (kind == "point") {
        if (tok.size() < 2) throw ParseError("point line needs <id> <mass>", lineno);
        if (!dists.empty() || root) throw ParseError("point lines must come first", lineno);
        if (!index.emplace(tok[0], X.ids.size()).second) throw ParseError("duplicate point " + tok[0], lineno);
        X.ids.push_back(tok[0]);
        X.weights.push_back(parse_double(tok[1]));
        std::vector<double> c;
        for (std::size_t k = 2; k < tok.size(); ++k) c.push_back(parse_double(tok[k]));
        if (!coords.empty() && c.size() != coords.front().size())
          throw ParseError("embedding dimension differs between points", lineno);
        coords.push_back(std::move(c));
      } else if (kind == "dist") {
        if (tok.size() != 3) throw ParseError("dist line needs <id> <id> <value>", lineno);
        auto a = index.find(tok[0]), b = index.find(tok[1]);
        if (a == index.end() || b == index.end()) throw ParseError("undeclared point in dist line", lineno);
        dists.emplace_back(a->second, b->second, parse_double(tok[2]));
      } else if (kind == "root") {
        if (tok.size() != 1 || root) throw ParseError("exactly one root line with one id", lineno);
        auto r = index.find(tok[0]);
        if (r == index.end()) throw ParseError("undeclared root", lineno);
        root = r->second;
      } else {
        throw ParseError("unknown record '" + kind + "'", lineno);
      }
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  if (!root) throw ParseError("missing root line", lineno);
  const auto n = static_cast<Eigen::Index>(X.ids.size());
  X.metric = linalg::Dense::Constant(n, n, -1.0);
  X.metric.diagonal().setZero();
  for (auto [a, b, d] : dists) {
    if (a == b) throw ParseError("dist line pairs a point with itself", lineno);
    auto i = static_cast<Eigen::Index>(a), j = static_cast<Eigen::Index>(b);
    if (X.metric(i, j) >= 0.0) throw ParseError("duplicate dist for " + X.ids[a] + " " + X.ids[b], lineno);
    X.metric(i, j) = X.metric(j, i) = d;
  }
  if ((X.metric.array() < 0.0).any()) throw ParseError("missing dist entries", lineno);
  X.root = *root;
  if (!coords.empty() && !coords.front().empty()) {
    linalg::Dense e(n, static_cast<Eigen::Index>(coords.front().size()));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index c = 0; c < e.cols(); ++c) e(i, c) = coords[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
    X.embedding = std::move(e);
  }
  try {
    X.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what(), lineno);
  }
  return X;
}

}  // namespace rfnet
