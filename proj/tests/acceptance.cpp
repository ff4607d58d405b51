// Acceptance runner. `acceptance N` checks criterion N (1..12) and prints one
// line "criterion N [name] PASS|FAIL: detail". No argument runs all of them.
// Exit status is 0 iff every requested criterion passed.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "support.hpp"

using namespace rfnet;
using namespace rfnet::testing;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Shared corpus for 1 and 2: 200 connected nets with n in [2, 50].
struct CorpusItem {
  Network net;
  std::vector<Vertex> boundary;
};

std::vector<CorpusItem> kernel_corpus() {
  std::vector<CorpusItem> out;
  StreamRng rng(2024, 1);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 2 + rng.below(49);
    Network net = random_network(n, 1000 + static_cast<std::uint64_t>(i), 0.05 + 0.3 * rng.uniform());
    std::vector<Vertex> A;
    const double p = rng.uniform() * 0.5;
    for (Vertex v = 0; v < n; ++v)
      if (rng.bernoulli(p)) A.push_back(v);
    if (A.empty()) A.push_back(static_cast<Vertex>(rng.below(n)));
    if (A.size() == n) A.pop_back();
    out.push_back({std::move(net), std::move(A)});
  }
  return out;
}

Outcome kernel_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (const auto& item : kernel_corpus()) {
    const GreenKernel g = green_kernel(item.net, item.boundary, false);
    const Eigen::MatrixXd D = dirichlet_inverse(item.net, item.boundary);
    for (Vertex y = 0; y < item.net.size(); ++y)
      for (Vertex z = 0; z < item.net.size(); ++z)
        worst = std::max(worst, std::abs(g(y, z) - D(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(z))));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 60.0, "max gap " + fmt(worst) + " (tol 1e-9), " + fmt(secs) + " s (limit 60)"};
}

Outcome commute_identity() {
  double worst = 0.0;
  std::size_t pairs = 0;
  StreamRng rng(7, 2);
  for (const auto& item : kernel_corpus()) {
    const Network& net = item.net;
    const Eigen::MatrixXd R = pinv_resistance(net);
    auto check = [&](Vertex x, Vertex y) {
      const double lhs = commute_time(net, x, y);
      worst = std::max(worst, std::abs(lhs - R(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) * net.total_mass()));
      ++pairs;
    };
    if (net.size() <= 15) {
      for (Vertex x = 0; x < net.size(); ++x)
        for (Vertex y = x + 1; y < net.size(); ++y) check(x, y);
    } else {
      for (int k = 0; k < 10; ++k) {
        const auto x = static_cast<Vertex>(rng.below(net.size())), y = static_cast<Vertex>(rng.below(net.size()));
        if (x != y) check(x, y);
      }
    }
  }
  return {worst <= 1e-9, "max |E_x s_y + E_y s_x - R mu(F)| " + fmt(worst) + " over " + std::to_string(pairs) + " pairs (tol 1e-9)"};
}

Outcome figure1_number() {
  const std::size_t n = 10000;
  const Network lin = figure1_family(n, Figure1Variant::linear);
  double exact_gap = 0.0;
  for (double r : {0.3, 1.0, 1.5, 2.0, 3.7, 10.0, 64.5, 100.0, 333.3, 1000.0, 2500.0, 4999.5, 7777.0, 9999.0, 9999.9}) {
    const double k = std::ceil(r);
    exact_gap = std::max(exact_gap, std::abs(ball_complement_resistance(lin, 0, r) - k / (k + 1.0)));
  }
  const double plateau = ball_complement_resistance(lin, 0, n / 2.0);
  const Network sq = figure1_family(1000000, Figure1Variant::sqrt);
  const double sqrt_value = ball_complement_resistance(sq, 0, 100.0);
  const bool exact_ok = exact_gap <= 1e-12;
  const bool plateau_ok = std::abs(plateau - 1.0) <= 1e-9;
  const bool sqrt_ok = sqrt_value > 10.0;
  std::string d = "ceil(r)/(ceil(r)+1) gap " + fmt(exact_gap) + (exact_ok ? " ok" : " FAIL") +
                  "; plateau at r=n/2: " + std::to_string(plateau) + ", |.-1| = " + fmt(std::abs(plateau - 1.0)) +
                  " (tol 1e-9)" + (plateau_ok ? " ok" : " FAIL") + "; sqrt profile at n=1e6, r=100: " + fmt(sqrt_value) +
                  (sqrt_ok ? " > 10 ok" : " FAIL");
  return {exact_ok && plateau_ok && sqrt_ok, d};
}

Outcome kernel_sandwich() {
  StreamRng rng(31, 4);
  std::size_t violations = 0;
  double worst = 0.0;
  int triples = 0;
  while (triples < 200) {
    const std::size_t n = 3 + rng.below(28);
    const Network net = random_network(n, 5000 + static_cast<std::uint64_t>(triples) + 17 * rng.below(1000));
    const auto x = static_cast<Vertex>(rng.below(n));
    const Eigen::MatrixXd R = pinv_resistance(net);
    const double far = R.row(static_cast<Eigen::Index>(x)).maxCoeff();
    const double eps = far * (0.02 + 0.9 * rng.uniform());
    std::vector<Vertex> ball;
    for (Vertex v = 0; v < n; ++v)
      if (R(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(v)) <= eps) ball.push_back(v);
    if (ball.size() == n) continue;
    ++triples;
    const Eigen::MatrixXd gx = dirichlet_inverse(net, {x}), gb = dirichlet_inverse(net, ball);
    const double lo = ((gx.array() - 2 * eps) - gb.array()).maxCoeff();
    const double hi = (gb - gx).maxCoeff();
    const double v = std::max({lo, hi, kernel_ball_sandwich_check(net, x, eps)});
    worst = std::max(worst, v);
    if (v > 1e-9) ++violations;
  }
  return {violations == 0, std::to_string(violations) + " violations beyond 1e-9 in 200 triples, worst excess " + fmt(worst)};
}

Outcome exponential_local_time() {
  const auto t0 = std::chrono::steady_clock::now();
  StreamRng rng(55, 5);
  std::size_t passed = 0;
  double min_p = 1.0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t n = 3 + rng.below(18);
    const Network net = random_network(n, 700 + static_cast<std::uint64_t>(i));
    const auto z = static_cast<Vertex>(rng.below(n));
    std::vector<Vertex> A;
    for (Vertex v = 0; v < n; ++v)
      if (v != z && rng.bernoulli(0.3)) A.push_back(v);
    if (A.empty()) A.push_back((z + 1) % n);
    const auto xs = exit_local_time_samples(net, z, A, {99, static_cast<std::uint64_t>(i), 10000, 1});
    const Vertex zz[] = {z};
    const auto ks = stats::ks_exponential(xs, set_resistance(net, zz, A));
    min_p = std::min(min_p, ks.p_value);
    if (ks.p_value >= 0.01) ++passed;
  }
  const double secs = seconds_since(t0);
  return {passed == 20 && secs < 300.0, std::to_string(passed) + "/20 KS tests pass at level 0.01 (min p " + fmt(min_p) +
                                            "), " + fmt(secs) + " s (limit 300)"};
}

Outcome hitting_bounds() {
  StreamRng rng(77, 6);
  int configs = 0, violations = 0;
  double worst_excess = -1e300;
  while (configs < 50) {
    const int kind = configs % 3;
    const bool path = rng.bernoulli(0.4);
    const std::size_t n = 4 + rng.below(16);
    const Network net = path ? unit_path(n) : random_network(n, 9000 + static_cast<std::uint64_t>(configs), 0.15);
    const auto x = static_cast<Vertex>(rng.below(net.size()));
    const auto dist = resistances_from(net, x);
    HittingTarget tg;
    double delta = 0.0;
    if (kind == 0) {
      tg.kind = BoundKind::point_set;
      const auto y = static_cast<Vertex>(rng.below(net.size()));
      if (y == x) continue;
      tg.set = {y};
      const Vertex from[] = {x};
      const double R = set_resistance(net, from, tg.set);
      delta = R * (0.1 + 0.8 * rng.uniform());
    } else if (kind == 1) {
      tg.kind = BoundKind::ball;
      tg.center = static_cast<Vertex>(rng.below(net.size()));
      const double R = dist[tg.center];
      if (!(R > 0.0)) continue;
      tg.eps = R * (0.05 + 0.35 * rng.uniform());
      delta = (R - 2 * tg.eps) * (0.1 + 0.8 * rng.uniform());
    } else {
      tg.kind = BoundKind::ball_complement;
      const double far = *std::max_element(dist.begin(), dist.end());
      tg.radius = far * (0.2 + 0.7 * rng.uniform());
      const double Rc = ball_complement_resistance(net, x, tg.radius);
      delta = Rc * (0.1 + 0.8 * rng.uniform());
    }
    const double t = std::exp(std::log(0.05) + rng.uniform() * std::log(200.0));
    const auto c = hitting_tail_vs_bounds(net, x, tg, t, delta, {123, static_cast<std::uint64_t>(configs), 20000, 1});
    ++configs;
    worst_excess = std::max(worst_excess, (c.empirical.value - c.bound) / std::max(c.empirical.std_error, 1e-300));
    if (!c.holds(3.0)) ++violations;
  }
  return {violations == 0, std::to_string(violations) + " of 50 configurations exceed bound + 3 SE; max (emp - bound)/SE " +
                               fmt(worst_excess)};
}

Outcome mc_vs_semigroup() {
  StreamRng rng(88, 7);
  const std::size_t N = 100000;
  int bad1 = 0, bad2 = 0;
  double worst1 = 0.0, worst2 = 0.0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t n = 3 + rng.below(8);
    const Network net = random_network(n, 300 + static_cast<std::uint64_t>(i));
    const auto x0 = static_cast<Vertex>(rng.below(n));
    const double t1 = 0.1 + 2.0 * rng.uniform(), t2 = t1 + 0.1 + 2.0 * rng.uniform();
    const double one[] = {t1};
    const auto l1 = estimate_fdd(net, x0, one, {11, static_cast<std::uint64_t>(2 * i), N, 1});
    const Eigen::MatrixXd P1 = semigroup_eig(net, t1), P2 = semigroup_eig(net, t2 - t1);
    double tv1 = 0.0;
    const auto m = l1.marginal(0, n);
    for (std::size_t v = 0; v < n; ++v) tv1 += std::abs(m[v] - P1(static_cast<Eigen::Index>(x0), static_cast<Eigen::Index>(v)));
    tv1 *= 0.5;
    const double both[] = {t1, t2};
    const auto l2 = estimate_fdd(net, x0, both, {11, static_cast<std::uint64_t>(2 * i + 1), N, 1});
    double tv2 = 0.0;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        tv2 += std::abs(l2.frequency({a, b}) - P1(static_cast<Eigen::Index>(x0), static_cast<Eigen::Index>(a)) *
                                                   P2(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
    tv2 *= 0.5;
    const double band1 = stats::tv_band(n, N), band2 = stats::tv_band(n * n, N);
    worst1 = std::max(worst1, tv1 / band1);
    worst2 = std::max(worst2, tv2 / band2);
    if (tv1 > band1) ++bad1;
    if (tv2 > band2) ++bad2;
  }
  return {bad1 == 0 && bad2 == 0, "one-time TV over band: " + std::to_string(bad1) + "/20 (max TV/band " + fmt(worst1) +
                                      "); two-time joint: " + std::to_string(bad2) + "/20 (max TV/band " + fmt(worst2) + ")"};
}

Outcome trace_consistency() {
  StreamRng rng(99, 8);
  const std::size_t N = 100000;
  int bad = 0;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t n = 4 + rng.below(12);
    const Network net = random_network(n, 400 + static_cast<std::uint64_t>(i));
    std::vector<Vertex> V{net.root()};
    for (Vertex v = 0; v < n; ++v)
      if (v != net.root() && rng.bernoulli(0.5)) V.push_back(v);
    if (V.size() < 2) V.push_back((net.root() + 1) % n);
    std::vector<double> nu;
    for (std::size_t k = 0; k < V.size(); ++k) nu.push_back(0.3 + rng.uniform());
    const double t = 0.2 + 3.0 * rng.uniform();
    const auto counts = trace_marginal_counts(net, net.root(), V, nu, t, {5, static_cast<std::uint64_t>(i), N, 1});
    const Network tr = trace_network(net, V, nu);
    const Eigen::MatrixXd P = semigroup_eig(tr, t);
    double tv = 0.0;
    for (std::size_t k = 0; k < V.size(); ++k)
      tv += std::abs(static_cast<double>(counts[k]) / static_cast<double>(N) -
                     P(static_cast<Eigen::Index>(tr.root()), static_cast<Eigen::Index>(k)));
    tv *= 0.5;
    const double band = stats::tv_band(V.size(), N);
    worst = std::max(worst, tv / band);
    if (tv > band) ++bad;
  }
  return {bad == 0, std::to_string(bad) + "/20 instances outside 3*sqrt(ln|V|/N); max TV/band " + fmt(worst)};
}

Outcome fuse_trace() {
  StreamRng rng(111, 9);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 5 + rng.below(30);
    const Network net = i % 2 ? random_network(n, 600 + static_cast<std::uint64_t>(i))
                              : gw_tree_conditioned(OffspringLaw::geometric, n, 600 + static_cast<std::uint64_t>(i));
    std::vector<std::pair<Vertex, Vertex>> pairs;
    const std::size_t J = 1 + rng.below(4);
    for (std::size_t k = 0; k < J; ++k) {
      const auto a = static_cast<Vertex>(rng.below(n)), b = static_cast<Vertex>(rng.below(n));
      if (a != b) pairs.emplace_back(a, b);
    }
    std::vector<char> marked(n, 0);
    marked[net.root()] = 1;
    for (auto [a, b] : pairs) marked[a] = marked[b] = 1;
    const auto free_it = std::find(marked.begin(), marked.end(), 0);
    if (free_it == marked.end()) {
      --i;
      continue;
    }
    // keep one unmarked vertex so the fused trace has at least two points
    std::vector<Vertex> V{net.root(), static_cast<Vertex>(free_it - marked.begin())};
    for (auto [a, b] : pairs) V.insert(V.end(), {a, b});
    for (Vertex v = 0; v < n; ++v)
      if (rng.bernoulli(0.3)) V.push_back(v);
    worst = std::max(worst, fuse_trace_commutation(net, pairs, V).residual);
  }
  return {worst <= 1e-9, "max commutation residual " + fmt(worst) + " over 100 instances (tol 1e-9)"};
}

Outcome ghp_exactness() {
  StreamRng rng(222, 10);
  std::vector<FiniteMMSpace> spaces;
  for (int i = 0; i < 100; ++i) spaces.push_back(random_space(1 + rng.below(5), rng));
  bool symmetric = true;
  double tri = 0.0, relabel = 0.0, brute = 0.0;
  bool all_exact = true;
  for (int i = 0; i < 50; ++i) {
    const auto& X = spaces[2 * static_cast<std::size_t>(i)];
    const auto& Y = spaces[2 * static_cast<std::size_t>(i) + 1];
    const auto& Z = spaces[(2 * static_cast<std::size_t>(i) + 2) % spaces.size()];
    const auto xy = ghp_search(X, Y), yx = ghp_search(Y, X);
    const auto xz = ghp_search(X, Z), zy = ghp_search(Z, Y);
    all_exact = all_exact && xy.exact && yx.exact && xz.exact && zy.exact;
    symmetric = symmetric && xy.value == yx.value;
    tri = std::max(tri, xy.value - xz.value - zy.value);
    if (X.size() * Y.size() <= 12) brute = std::max(brute, std::abs(xy.value - brute_force_ghp(X, Y)));
    std::vector<std::size_t> perm(X.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t k = perm.size(); k > 1; --k) std::swap(perm[k - 1], perm[rng.below(k)]);
    relabel = std::max(relabel, ghp_search(X, permuted(X, perm)).value);
  }
  const bool ok = all_exact && symmetric && tri <= 1e-12 && relabel == 0.0 && brute <= 1e-12;
  return {ok, std::string("symmetry ") + (symmetric ? "exact" : "BROKEN") + ", max triangle excess " + fmt(tri) +
                  " (tol 1e-12), relabeled distance " + fmt(relabel) + ", gap to subset enumeration " + fmt(brute) +
                  (all_exact ? "" : ", non-exhaustive result seen")};
}

Outcome resolvent_identities() {
  StreamRng rng(333, 11);
  double eq = 0.0, dec = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 3 + rng.below(30);
    const Network net = random_network(n, 800 + static_cast<std::uint64_t>(i));
    const double alpha = std::exp(std::log(0.01) + rng.uniform() * std::log(1000.0));
    const auto a = static_cast<Vertex>(rng.below(n));
    const Vertex A[] = {a};
    const GreenKernel g = green_kernel(net, A, false);
    const auto K = alpha_resolvent_killed(net, A, alpha);
    const auto m = static_cast<Eigen::Index>(g.size());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index k = 0; k < m; ++k) M(k, k) = net.measure(g.interior[static_cast<std::size_t>(k)]);
    const Eigen::MatrixXd lhs = K.kernel * M, rhs = g.values * M - alpha * g.values * M * K.kernel * M;
    eq = std::max(eq, (lhs - rhs).cwiseAbs().maxCoeff());
    const auto x1 = static_cast<Vertex>((a + 1 + rng.below(n - 1)) % n);
    const auto F = alpha_resolvent_full(net, alpha, a, x1);
    Eigen::MatrixXd B = laplacian(net);
    for (Vertex v = 0; v < n; ++v) B(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(v)) += alpha * net.measure(v);
    const Eigen::MatrixXd direct = B.fullPivLu().inverse();
    dec = std::max({dec, F.decomposition_gap, (F.kernel - direct).cwiseAbs().maxCoeff()});
  }
  return {eq <= 1e-9 && dec <= 1e-8, "resolvent equation residual " + fmt(eq) + " (tol 1e-9); decomposition gap " +
                                         fmt(dec) + " (tol 1e-8)"};
}

Outcome convergence_smoke() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentPlan sq, lin;
  for (std::size_t n : {100, 1000, 10000}) {
    sq.ensembles.push_back("fig1:n=" + std::to_string(n) + ",variant=sqrt");
    lin.ensembles.push_back("fig1:n=" + std::to_string(n) + ",variant=linear");
  }
  sq.seed = lin.seed = 12;
  const auto rs = run_convergence(sq);
  const auto rl = run_convergence(lin);
  const double secs = seconds_since(t0);
  std::string gaps;
  for (const auto& g : rs.successive) gaps += (gaps.empty() ? "" : ", ") + fmt(g.gap) + "+-" + fmt(g.error);
  const bool ok = rs.cauchy_decreasing && rl.growth_fails && secs < 900.0;
  return {ok, std::string("sqrt successive gaps [") + gaps + "] " + (rs.cauchy_decreasing ? "decreasing" : "NOT decreasing") +
                  "; linear growth " + (rl.growth_fails ? "flagged as failing" : "NOT flagged") + " (slope " +
                  fmt(rl.growth.upper_slope) + "); " + fmt(secs) + " s (limit 900)"};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {"kernel-oracle", kernel_oracle},
      {"commute-time", commute_identity},
      {"figure1-number", figure1_number},
      {"kernel-sandwich", kernel_sandwich},
      {"exit-local-time", exponential_local_time},
      {"hitting-bounds", hitting_bounds},
      {"mc-vs-semigroup", mc_vs_semigroup},
      {"trace-consistency", trace_consistency},
      {"fuse-trace", fuse_trace},
      {"ghp-exactness", ghp_exactness},
      {"resolvent", resolvent_identities},
      {"convergence-smoke", convergence_smoke},
  };
  std::vector<std::size_t> chosen;
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k < 1 || k > static_cast<int>(all.size())) {
      std::cerr << "usage: acceptance [1-12 ...]\n";
      return 2;
    }
    chosen.push_back(static_cast<std::size_t>(k - 1));
  }
  if (chosen.empty())
    for (std::size_t k = 0; k < all.size(); ++k) chosen.push_back(k);
  bool ok = true;
  for (auto k : chosen) {
    Outcome o;
    try {
      o = all[k].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << k + 1 << " [" << all[k].name << "] " << (o.pass ? "PASS" : "FAIL") << ": " << o.detail
              << std::endl;
    ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
