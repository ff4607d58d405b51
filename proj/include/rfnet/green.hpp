#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "rfnet/linalg.hpp"
#include "rfnet/network.hpp"
#include "rfnet/resistance.hpp"

namespace rfnet {

/// Green kernel g_A of the chain killed on hitting A, stored over V \ A.
/// Lookups that touch A return 0: the kernel vanishes on the boundary.
struct GreenKernel {
  std::vector<Vertex> boundary;
  std::vector<Vertex> interior;
  std::vector<std::ptrdiff_t> position;
  linalg::Dense values;
  /// Max entrywise gap to the Dirichlet-Laplacian inverse; NaN when not checked.
  double oracle_gap = std::numeric_limits<double>::quiet_NaN();

  double operator()(Vertex y, Vertex z) const {
    const auto i = position.at(y), j = position.at(z);
    return (i < 0 || j < 0) ? 0.0 : values(i, j);
  }
  std::size_t size() const { return interior.size(); }
};

namespace detail {

inline linalg::Subset interior_of(const Network& net, std::span<const Vertex> A) {
  if (A.empty()) throw InvalidArgument("boundary set must be nonempty");
  auto mask = linalg::mask_of(net.size(), A);
  linalg::Subset interior = linalg::all_but(net.size(), mask);
  if (interior.size() == 0) throw InvalidArgument("boundary set must be a proper subset");
  return interior;
}

inline std::vector<Vertex> sorted_unique(std::span<const Vertex> A) {
  std::vector<Vertex> v(A.begin(), A.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace detail

/// [L_D^{-1}] with L_D the Laplacian with the rows and columns of A removed.
inline linalg::Dense dirichlet_green_oracle(const Network& net, std::span<const Vertex> A) {
  auto interior = detail::interior_of(net, A);
  return linalg::spd_inverse(linalg::dense_dirichlet(net, interior));
}

/// g_A(y,z) = (R(y,A) + R(z,A) - R_A(y,z)) / 2, with R_A the resistance after
/// fusing A. With `verify`, also records the gap to the Dirichlet inverse.
inline GreenKernel green_kernel(const Network& net, std::span<const Vertex> A, bool verify = true) {
  auto interior = detail::interior_of(net, A);
  GreenKernel g;
  g.boundary = detail::sorted_unique(A);
  g.interior = interior.members;
  g.position = interior.position;

  auto fused = fuse_network(net, {g.boundary});
  const Vertex a = fused.projection[g.boundary.front()];
  const ResistanceMatrix RA = resistance_matrix(fused.net);
  const auto m = static_cast<Eigen::Index>(interior.size());
  g.values.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Vertex yi = fused.projection[g.interior[static_cast<std::size_t>(i)]];
    for (Eigen::Index j = i; j < m; ++j) {
      const Vertex zj = fused.projection[g.interior[static_cast<std::size_t>(j)]];
      const double v = 0.5 * (RA(yi, a) + RA(zj, a) - RA(yi, zj));
      g.values(i, j) = g.values(j, i) = v;
    }
  }
  if (verify) {
    const linalg::Dense oracle = dirichlet_green_oracle(net, A);
    g.oracle_gap = (oracle - g.values).cwiseAbs().maxCoeff();
  }
  return g;
}

/// (G_A f)(y) = sum_z g(y,z) f(z) mu(z), for f given on the interior.
inline std::vector<double> green_apply(const GreenKernel& g, std::span<const double> f,
                                       std::span<const double> measure) {
  if (f.size() != g.size()) throw InvalidArgument("function must be given on the kernel interior");
  if (measure.size() != g.position.size()) throw InvalidArgument("measure must cover the whole network");
  std::vector<double> out(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j)
      s += g.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * f[j] * measure[g.interior[j]];
    out[i] = s;
  }
  return out;
}

/// Expected time E_y sigma_A for every interior y.
inline std::vector<double> expected_hitting_times(const Network& net, const GreenKernel& g) {
  std::vector<double> one(g.size(), 1.0);
  return green_apply(g, one, net.measures());
}

/// P_x(sigma_z <= sigma_A) = g_A(x,z) / g_A(z,z).
inline double hitting_probability(const Network& net, Vertex x, Vertex z, std::span<const Vertex> A) {
  check_vertex(net, x);
  check_vertex(net, z);
  auto mask = linalg::mask_of(net.size(), A);
  if (mask[x] || mask[z]) throw InvalidArgument("x and z must lie outside A");
  if (x == z) return 1.0;
  const GreenKernel g = green_kernel(net, A, false);
  return g(x, z) / g(z, z);
}

/// E_x sigma_y + E_y sigma_x from two killed kernels.
inline double commute_time(const Network& net, Vertex x, Vertex y) {
  check_vertex(net, x);
  check_vertex(net, y);
  if (x == y) throw InvalidArgument("commute time needs distinct vertices");
  const Vertex ax[] = {x};
  const Vertex ay[] = {y};
  const GreenKernel gy = green_kernel(net, ay, false);
  const GreenKernel gx = green_kernel(net, ax, false);
  const auto ty = expected_hitting_times(net, gy);
  const auto tx = expected_hitting_times(net, gx);
  return ty[static_cast<std::size_t>(gy.position[x])] + tx[static_cast<std::size_t>(gx.position[y])];
}

/// alpha-resolvent kernel: G^alpha f(y) = sum_z kernel(y,z) f(z) mu(z).
/// For the killed version the kernel lives on V \ A; otherwise on all of V.
struct AlphaResolvent {
  double alpha = 0.0;
  std::vector<Vertex> boundary;
  std::vector<Vertex> interior;
  std::vector<std::ptrdiff_t> position;
  linalg::Dense kernel;
  /// Max gap between the direct solve and the strong-Markov decomposition
  /// (full resolvent only).
  double decomposition_gap = std::numeric_limits<double>::quiet_NaN();

  double operator()(Vertex y, Vertex z) const {
    const auto i = position.at(y), j = position.at(z);
    return (i < 0 || j < 0) ? 0.0 : kernel(i, j);
  }

  /// G^alpha f on the whole vertex set; f is indexed by network vertex.
  std::vector<double> apply(std::span<const double> f, std::span<const double> measure) const {
    if (f.size() != position.size() || measure.size() != position.size())
      throw InvalidArgument("function and measure must cover the whole network");
    std::vector<double> out(position.size(), 0.0);
    for (std::size_t i = 0; i < interior.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < interior.size(); ++j)
        s += kernel(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * f[interior[j]] *
             measure[interior[j]];
      out[interior[i]] = s;
    }
    return out;
  }
};

/// Killed resolvent: kernel (alpha*M + L_D)^{-1}, M = diag(mu).
inline AlphaResolvent alpha_resolvent_killed(const Network& net, std::span<const Vertex> A, double alpha) {
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  auto interior = detail::interior_of(net, A);
  linalg::Dense K = linalg::dense_dirichlet(net, interior);
  for (std::size_t i = 0; i < interior.size(); ++i)
    K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += alpha * net.measure(interior.members[i]);
  AlphaResolvent r;
  r.alpha = alpha;
  r.boundary = detail::sorted_unique(A);
  r.interior = interior.members;
  r.position = interior.position;
  r.kernel = linalg::spd_inverse(K);
  return r;
}

/// Full resolvent (alpha - generator)^{-1}, also rebuilt from killed
/// resolvents by decomposing paths at successive x0 -> x1 -> x0 loops.
inline AlphaResolvent alpha_resolvent_full(const Network& net, double alpha, Vertex x0, Vertex x1) {
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  check_vertex(net, x0);
  check_vertex(net, x1);
  if (x0 == x1) throw InvalidArgument("decomposition needs two distinct marked points");
  const std::size_t n = net.size();
  linalg::Dense K = linalg::dense_laplacian(net);
  for (std::size_t i = 0; i < n; ++i)
    K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += alpha * net.measure(i);
  AlphaResolvent r;
  r.alpha = alpha;
  r.interior.resize(n);
  r.position.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.interior[i] = i;
    r.position[i] = static_cast<std::ptrdiff_t>(i);
  }
  r.kernel = linalg::spd_inverse(K);

  const Vertex a0[] = {x0};
  const Vertex a1[] = {x1};
  const AlphaResolvent k0 = alpha_resolvent_killed(net, a0, alpha);
  const AlphaResolvent k1 = alpha_resolvent_killed(net, a1, alpha);
  const auto mu = net.measures();
  const std::vector<double> one(n, 1.0);
  const auto k0one = k0.apply(one, mu);
  const auto k1one = k1.apply(one, mu);
  // E_y e^{-alpha sigma_{x0}} and the Laplace transform of one x0 -> x1 -> x0 loop.
  std::vector<double> hit0(n);
  for (std::size_t y = 0; y < n; ++y) hit0[y] = 1.0 - alpha * k0one[y];
  const double hit1_from0 = 1.0 - alpha * k1one[x0];
  const double loop = hit1_from0 * hit0[x1];
  linalg::Dense decomposed(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::vector<double> indicator(n, 0.0);
  for (std::size_t z = 0; z < n; ++z) {
    indicator[z] = 1.0;
    const auto k0f = k0.apply(indicator, mu);
    const auto k1f = k1.apply(indicator, mu);
    const double excursion = k1f[x0] + hit1_from0 * k0f[x1];
    for (std::size_t y = 0; y < n; ++y) {
      const double value = k0f[y] + hit0[y] * excursion / (1.0 - loop);
      decomposed(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(z)) = value / mu[z];
    }
    indicator[z] = 0.0;
  }
  r.decomposition_gap = (decomposed - r.kernel).cwiseAbs().maxCoeff();
  return r;
}

/// Largest violation of g_x - 2 eps <= g_{closed ball(x, eps)} <= g_x over all pairs.
inline double kernel_ball_sandwich_check(const Network& net, Vertex x, double eps) {
  check_vertex(net, x);
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  const auto dist = resistances_from(net, x);
  std::vector<Vertex> ball;
  for (Vertex v = 0; v < net.size(); ++v)
    if (dist[v] <= eps) ball.push_back(v);
  if (ball.size() == net.size()) throw InvalidArgument("ball covers the whole network");
  const Vertex point[] = {x};
  const GreenKernel gx = green_kernel(net, point, false);
  const GreenKernel gb = green_kernel(net, ball, false);
  double worst = 0.0;
  for (Vertex y = 0; y < net.size(); ++y)
    for (Vertex z = 0; z < net.size(); ++z) {
      const double lo = gx(y, z) - 2.0 * eps, mid = gb(y, z), hi = gx(y, z);
      worst = std::max({worst, lo - mid, mid - hi});
    }
  return worst;
}

/// Generator Q(x,y) = c(x,y)/mu(x), Q(x,x) = -sum_y c(x,y)/mu(x).
inline linalg::Dense generator_matrix(const Network& net) {
  const auto n = static_cast<Eigen::Index>(net.size());
  linalg::Dense Q = linalg::Dense::Zero(n, n);
  for (Vertex x = 0; x < net.size(); ++x) {
    const auto i = static_cast<Eigen::Index>(x);
    for (const auto& nb : net.neighbors(x)) Q(i, static_cast<Eigen::Index>(nb.vertex)) = nb.conductance / net.measure(x);
    Q(i, i) = -net.degree(x) / net.measure(x);
  }
  return Q;
}

/// exp(tQ) by uniformization on a dyadic subinterval followed by repeated
/// squaring. Every term is nonnegative, so rows are probability vectors.
inline linalg::Dense transition_semigroup(const Network& net, double t) {
  if (!(t >= 0.0)) throw InvalidArgument("time must be nonnegative");
  const auto n = static_cast<Eigen::Index>(net.size());
  if (t == 0.0) return linalg::Dense::Identity(n, n);
  const linalg::Dense Q = generator_matrix(net);
  const double rate = (-Q.diagonal()).maxCoeff();
  int squarings = 0;
  double tau = t;
  while (rate * tau > 0.5) {
    tau *= 0.5;
    ++squarings;
  }
  const linalg::Dense K = linalg::Dense::Identity(n, n) + Q / rate;
  const double lt = rate * tau;
  linalg::Dense P = linalg::Dense::Zero(n, n);
  linalg::Dense term = linalg::Dense::Identity(n, n);
  double weight = std::exp(-lt);
  for (int j = 0; j < 200; ++j) {
    P += weight * term;
    if (weight < 1e-20) break;
    term = term * K;
    weight *= lt / (j + 1);
  }
  for (int s = 0; s < squarings; ++s) P = P * P;
  return P;
}

}  // namespace rfnet
