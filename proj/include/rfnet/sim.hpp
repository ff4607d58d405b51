#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <ostream>
#include <span>
#include <thread>
#include <vector>

#include "rfnet/error.hpp"
#include "rfnet/green.hpp"
#include "rfnet/network.hpp"
#include "rfnet/resistance.hpp"
#include "rfnet/rng.hpp"
#include "rfnet/stats.hpp"

namespace rfnet {

struct SimulationConfig {
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  std::size_t samples = 100000;
  unsigned jobs = 1;
};

struct Jump {
  double time;
  Vertex vertex;
};

/// Piecewise-constant trajectory: vertex jumps[i].vertex on [jumps[i].time, jumps[i+1].time).
struct PathSample {
  std::vector<Jump> jumps;
  double horizon = 0.0;

  Vertex vertex_at(double t) const {
    if (jumps.empty()) throw InvalidArgument("empty path");
    if (t < 0.0 || t > horizon) throw InvalidArgument("time outside the simulated horizon");
    auto it = std::upper_bound(jumps.begin(), jumps.end(), t, [](double s, const Jump& j) { return s < j.time; });
    return std::prev(it)->vertex;
  }
};

inline void write_path_csv(std::ostream& os, const Network& net, const PathSample& p) {
  os << "time,vertex\n";
  for (const auto& j : p.jumps) os << format_double(j.time) << ',' << net.label(j.vertex) << '\n';
}

/// Holding rates and cumulative conductance tables for exact-event stepping.
class JumpChain {
 public:
  explicit JumpChain(const Network& net) : net_(&net), cumulative_(net.size()) {
    for (Vertex x = 0; x < net.size(); ++x) {
      double acc = 0.0;
      for (const auto& nb : net.neighbors(x)) {
        acc += nb.conductance;
        cumulative_[x].push_back(acc);
      }
    }
  }

  const Network& network() const { return *net_; }
  double rate(Vertex x) const { return net_->degree(x) / net_->measure(x); }
  double hold(Vertex x, StreamRng& rng) const { return rng.exponential(rate(x)); }

  Vertex next(Vertex x, StreamRng& rng) const {
    const auto& cum = cumulative_[x];
    const double u = rng.uniform() * cum.back();
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) --it;
    return net_->neighbors(x)[static_cast<std::size_t>(it - cum.begin())].vertex;
  }

 private:
  const Network* net_;
  std::vector<std::vector<double>> cumulative_;
};

namespace detail {

inline constexpr std::size_t kChunk = 8192;

inline StreamRng chunk_rng(const SimulationConfig& cfg, std::size_t chunk) {
  return StreamRng(cfg.seed, mix64(cfg.stream ^ mix64(static_cast<std::uint64_t>(chunk) + kGolden)));
}

/// Runs fn(rng, count) on fixed-size chunks, each with its own stream, and
/// returns the partial results in chunk order. The output does not depend on
/// cfg.jobs.
template <class Fn>
auto run_chunks(const SimulationConfig& cfg, std::size_t samples, Fn fn) {
  using Partial = decltype(fn(std::declval<StreamRng&>(), std::size_t{}));
  const std::size_t chunks = (samples + kChunk - 1) / kChunk;
  std::vector<Partial> parts(chunks);
  auto work = [&](std::size_t c) {
    StreamRng rng = chunk_rng(cfg, c);
    const std::size_t count = std::min(kChunk, samples - c * kChunk);
    parts[c] = fn(rng, count);
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(cfg.jobs, static_cast<unsigned>(std::max<std::size_t>(chunks, 1))));
  if (jobs == 1) {
    for (std::size_t c = 0; c < chunks; ++c) work(c);
    return parts;
  }
  std::atomic<std::size_t> cursor{0};
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < jobs; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c; (c = cursor.fetch_add(1)) < chunks;) work(c);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return parts;
}

template <class T>
std::vector<T> concat(std::vector<std::vector<T>> parts) {
  std::vector<T> out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

inline std::size_t sum(const std::vector<std::size_t>& parts) {
  std::size_t s = 0;
  for (auto p : parts) s += p;
  return s;
}

inline PathSample walk(const JumpChain& chain, Vertex x0, double horizon, StreamRng& rng) {
  PathSample p;
  p.horizon = horizon;
  p.jumps.push_back({0.0, x0});
  double t = 0.0;
  Vertex x = x0;
  for (;;) {
    const double h = chain.hold(x, rng);
    if (t + h > horizon) break;
    t += h;
    x = chain.next(x, rng);
    p.jumps.push_back({t, x});
  }
  return p;
}

/// Position at time t without storing the path.
inline Vertex position_at(const JumpChain& chain, Vertex x0, double t, StreamRng& rng) {
  double s = 0.0;
  Vertex x = x0;
  for (;;) {
    const double h = chain.hold(x, rng);
    if (s + h > t) return x;
    s += h;
    x = chain.next(x, rng);
  }
}

}  // namespace detail

inline PathSample simulate_path(const Network& net, Vertex x0, double horizon, const SimulationConfig& cfg) {
  check_vertex(net, x0);
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidArgument("horizon must be positive and finite");
  JumpChain chain(net);
  StreamRng rng(cfg.seed, cfg.stream);
  return detail::walk(chain, x0, horizon, rng);
}

/// L_t(x): occupation time of x up to t divided by mu(x).
struct LocalTimeField {
  double time = 0.0;
  std::vector<double> values;

  double operator()(Vertex x) const { return values.at(x); }
};

inline LocalTimeField local_times(const PathSample& path, std::span<const double> mu, double t) {
  if (path.jumps.empty()) throw InvalidArgument("empty path");
  if (!(t >= 0.0)) throw InvalidArgument("time must be nonnegative");
  if (t > path.horizon) throw InvalidArgument("local time requested beyond the path horizon");
  LocalTimeField f;
  f.time = t;
  f.values.assign(mu.size(), 0.0);
  for (std::size_t i = 0; i < path.jumps.size(); ++i) {
    const double a = path.jumps[i].time;
    if (a >= t) break;
    const double b = i + 1 < path.jumps.size() ? std::min(path.jumps[i + 1].time, t) : t;
    const Vertex x = path.jumps[i].vertex;
    if (x >= mu.size()) throw InvalidArgument("path vertex outside the measure");
    f.values[x] += b - a;
  }
  for (std::size_t x = 0; x < mu.size(); ++x) f.values[x] /= mu[x];
  return f;
}

struct KilledPath {
  PathSample path;
  double sigma = 0.0;
};

namespace detail {
inline KilledPath walk_until(const JumpChain& chain, Vertex x0, const std::vector<char>& target, StreamRng& rng) {
  KilledPath k;
  k.path.jumps.push_back({0.0, x0});
  double t = 0.0;
  Vertex x = x0;
  while (!target[x]) {
    t += chain.hold(x, rng);
    x = chain.next(x, rng);
    k.path.jumps.push_back({t, x});
  }
  k.sigma = t;
  k.path.horizon = t;
  return k;
}

inline std::vector<char> nonempty_mask(const Network& net, std::span<const Vertex> A) {
  if (A.empty()) throw InvalidArgument("target set is empty");
  return linalg::mask_of(net.size(), A);
}
}  // namespace detail

/// Trajectory stopped at the first entry to A. Starting inside A gives sigma = 0.
inline KilledPath killed_path(const Network& net, Vertex x0, std::span<const Vertex> A, const SimulationConfig& cfg) {
  check_vertex(net, x0);
  const auto target = detail::nonempty_mask(net, A);
  JumpChain chain(net);
  StreamRng rng(cfg.seed, cfg.stream);
  return detail::walk_until(chain, x0, target, rng);
}

/// Path-level time change: the clock A_t = sum_{x in V} L_t(x) nu(x) and its
/// right-continuous inverse. The output keeps the original vertex ids; nu is
/// given in the order of V.
inline PathSample time_change_trace(const PathSample& path, std::span<const double> mu, std::span<const Vertex> V,
                                    std::span<const double> nu) {
  if (path.jumps.empty()) throw InvalidArgument("empty path");
  if (V.size() != nu.size()) throw InvalidArgument("trace measure must give one weight per kept vertex");
  std::vector<double> speed(mu.size(), 0.0);
  for (std::size_t i = 0; i < V.size(); ++i) {
    if (V[i] >= mu.size()) throw InvalidArgument("trace set contains an unknown vertex");
    if (!(nu[i] > 0.0)) throw InvalidArgument("trace measure must be strictly positive on the kept set");
    speed[V[i]] = nu[i] / mu[V[i]];
  }
  PathSample out;
  double clock = 0.0;
  for (std::size_t i = 0; i < path.jumps.size(); ++i) {
    const Vertex x = path.jumps[i].vertex;
    if (x >= mu.size()) throw InvalidArgument("path vertex outside the measure");
    const double end = i + 1 < path.jumps.size() ? path.jumps[i + 1].time : path.horizon;
    if (speed[x] > 0.0) {
      if (out.jumps.empty() || out.jumps.back().vertex != x) {
        if (!out.jumps.empty() && out.jumps.back().time == clock) out.jumps.back().vertex = x;
        else out.jumps.push_back({clock, x});
      }
      clock += (end - path.jumps[i].time) * speed[x];
    }
  }
  if (out.jumps.empty()) throw InvalidArgument("path never visits the trace set");
  out.horizon = clock;
  return out;
}

namespace detail {
/// Trace position at traced time t, simulated on the fly.
inline Vertex trace_position_at(const JumpChain& chain, Vertex x0, const std::vector<double>& speed, double t,
                                StreamRng& rng) {
  double clock = 0.0;
  Vertex x = x0;
  for (;;) {
    const double h = chain.hold(x, rng);
    if (speed[x] > 0.0) {
      const double dc = h * speed[x];
      if (clock + dc > t) return x;
      clock += dc;
    }
    x = chain.next(x, rng);
  }
}
}  // namespace detail

/// Empirical law of the traced process at traced time t, as counts over the
/// positions of V. x0 must lie in V.
inline std::vector<std::size_t> trace_marginal_counts(const Network& net, Vertex x0, std::span<const Vertex> V,
                                                      std::span<const double> nu, double t,
                                                      const SimulationConfig& cfg) {
  check_vertex(net, x0);
  if (!(t >= 0.0)) throw InvalidArgument("time must be nonnegative");
  if (V.size() != nu.size()) throw InvalidArgument("trace measure must give one weight per kept vertex");
  std::vector<double> speed(net.size(), 0.0);
  std::vector<std::ptrdiff_t> pos(net.size(), -1);
  for (std::size_t i = 0; i < V.size(); ++i) {
    check_vertex(net, V[i]);
    if (!(nu[i] > 0.0)) throw InvalidArgument("trace measure must be strictly positive on the kept set");
    speed[V[i]] = nu[i] / net.measure(V[i]);
    pos[V[i]] = static_cast<std::ptrdiff_t>(i);
  }
  if (pos[x0] < 0) throw InvalidArgument("trace start must lie in the kept set");
  JumpChain chain(net);
  auto parts = detail::run_chunks(cfg, cfg.samples, [&](StreamRng& rng, std::size_t count) {
    std::vector<std::size_t> c(V.size(), 0);
    for (std::size_t s = 0; s < count; ++s)
      ++c[static_cast<std::size_t>(pos[detail::trace_position_at(chain, x0, speed, t, rng)])];
    return c;
  });
  std::vector<std::size_t> total(V.size(), 0);
  for (auto& p : parts)
    for (std::size_t i = 0; i < p.size(); ++i) total[i] += p[i];
  return total;
}

/// Empirical joint law of (X_{t1}, ..., X_{tK}).
struct EmpiricalLaw {
  std::vector<double> times;
  std::map<std::vector<Vertex>, std::size_t> counts;
  std::size_t samples = 0;

  double frequency(const std::vector<Vertex>& tuple) const {
    auto it = counts.find(tuple);
    return it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(samples);
  }

  /// Marginal frequencies of coordinate k over n vertices.
  std::vector<double> marginal(std::size_t k, std::size_t n) const {
    std::vector<double> m(n, 0.0);
    for (const auto& [tuple, c] : counts) m[tuple.at(k)] += static_cast<double>(c);
    for (auto& v : m) v /= static_cast<double>(samples);
    return m;
  }
};

inline EmpiricalLaw estimate_fdd(const Network& net, Vertex x0, std::span<const double> times,
                                 const SimulationConfig& cfg) {
  check_vertex(net, x0);
  if (times.empty()) throw InvalidArgument("empty time list");
  if (cfg.samples == 0) throw InvalidArgument("sample count must be positive");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0.0) || !std::isfinite(times[i])) throw InvalidArgument("times must be finite and nonnegative");
    if (i > 0 && !(times[i] > times[i - 1])) throw InvalidArgument("times must be strictly increasing");
  }
  JumpChain chain(net);
  auto parts = detail::run_chunks(cfg, cfg.samples, [&](StreamRng& rng, std::size_t count) {
    std::map<std::vector<Vertex>, std::size_t> local;
    std::vector<Vertex> tuple(times.size());
    for (std::size_t s = 0; s < count; ++s) {
      double t = 0.0;
      Vertex x = x0;
      double h = chain.hold(x, rng);
      for (std::size_t k = 0; k < times.size(); ++k) {
        while (t + h <= times[k]) {
          t += h;
          x = chain.next(x, rng);
          h = chain.hold(x, rng);
        }
        tuple[k] = x;
      }
      ++local[tuple];
    }
    return local;
  });
  EmpiricalLaw law;
  law.times.assign(times.begin(), times.end());
  law.samples = cfg.samples;
  for (auto& p : parts)
    for (auto& [k, c] : p) law.counts[k] += c;
  return law;
}

/// Exact law of (X_{t1}, X_{t2}) from x0, as an n x n matrix (K = 2) or the
/// row p_{t1}(x0, .) (K = 1).
inline linalg::Dense exact_fdd(const Network& net, Vertex x0, std::span<const double> times) {
  check_vertex(net, x0);
  const auto i0 = static_cast<Eigen::Index>(x0);
  if (times.size() == 1) return transition_semigroup(net, times[0]).row(i0);
  if (times.size() != 2) throw InvalidArgument("exact joint law is available for one or two times");
  if (!(times[1] > times[0])) throw InvalidArgument("times must be strictly increasing");
  const linalg::Dense p1 = transition_semigroup(net, times[0]);
  const linalg::Dense p2 = transition_semigroup(net, times[1] - times[0]);
  return p1.row(i0).transpose().asDiagonal() * p2;
}

/// Total-variation distance of the empirical law from the exact one (K <= 2).
inline double fdd_total_variation(const Network& net, Vertex x0, const EmpiricalLaw& law) {
  const linalg::Dense exact = exact_fdd(net, x0, law.times);
  double s = 0.0;
  const auto n = net.size();
  if (law.times.size() == 1) {
    const auto emp = law.marginal(0, n);
    for (std::size_t y = 0; y < n; ++y) s += std::abs(emp[y] - exact(0, static_cast<Eigen::Index>(y)));
  } else {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        s += std::abs(law.frequency({a, b}) - exact(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
  }
  return 0.5 * s;
}

/// Samples of sigma_A from x0.
inline std::vector<double> hitting_time_samples(const Network& net, Vertex x0, std::span<const Vertex> A,
                                                const SimulationConfig& cfg) {
  check_vertex(net, x0);
  const auto target = detail::nonempty_mask(net, A);
  JumpChain chain(net);
  return detail::concat(detail::run_chunks(cfg, cfg.samples, [&](StreamRng& rng, std::size_t count) {
    std::vector<double> out(count);
    for (auto& v : out) v = detail::walk_until(chain, x0, target, rng).sigma;
    return out;
  }));
}

/// Samples of the holding time at x0.
inline std::vector<double> holding_time_samples(const Network& net, Vertex x0, const SimulationConfig& cfg) {
  check_vertex(net, x0);
  JumpChain chain(net);
  return detail::concat(detail::run_chunks(cfg, cfg.samples, [&](StreamRng& rng, std::size_t count) {
    std::vector<double> out(count);
    for (auto& v : out) v = chain.hold(x0, rng);
    return out;
  }));
}

/// Samples of L_{sigma_A}(z) under P_z.
inline std::vector<double> exit_local_time_samples(const Network& net, Vertex z, std::span<const Vertex> A,
                                                   const SimulationConfig& cfg) {
  check_vertex(net, z);
  const auto target = detail::nonempty_mask(net, A);
  if (target[z]) throw InvalidArgument("start vertex lies in the target set");
  JumpChain chain(net);
  const double mz = net.measure(z);
  return detail::concat(detail::run_chunks(cfg, cfg.samples, [&](StreamRng& rng, std::size_t count) {
    std::vector<double> out(count);
    for (auto& v : out) {
      double occ = 0.0;
      Vertex x = z;
      while (!target[x]) {
        const double h = chain.hold(x, rng);
        if (x == z) occ += h;
        x = chain.next(x, rng);
      }
      v = occ / mz;
    }
    return out;
  }));
}

/// P_x(sigma_z <= sigma_A).
inline stats::Estimate hit_before_probability(const Network& net, Vertex x, Vertex z, std::span<const Vertex> A,
                                              const SimulationConfig& cfg) {
  check_vertex(net, x);
  check_vertex(net, z);
  auto target = detail::nonempty_mask(net, A);
  if (target[x] || target[z]) throw InvalidArgument("x and z must lie outside A");
  JumpChain chain(net);
  auto parts = detail::run_chunks(cfg, cfg.samples, [&](StreamRng& rng, std::size_t count) {
    std::size_t hits = 0;
    for (std::size_t s = 0; s < count; ++s) {
      Vertex y = x;
      while (y != z && !target[y]) y = chain.next(y, rng);
      hits += y == z;
    }
    return hits;
  });
  return stats::proportion_estimate(detail::sum(parts), cfg.samples);
}

/// P_x(sigma_T <= t) for a vertex mask T not containing x.
inline stats::Estimate hit_by_time_probability(const Network& net, Vertex x, const std::vector<char>& target, double t,
                                               const SimulationConfig& cfg) {
  check_vertex(net, x);
  if (target.size() != net.size()) throw InvalidArgument("target mask size mismatch");
  JumpChain chain(net);
  auto parts = detail::run_chunks(cfg, cfg.samples, [&](StreamRng& rng, std::size_t count) {
    std::size_t hits = 0;
    for (std::size_t s = 0; s < count; ++s) {
      double clock = 0.0;
      Vertex y = x;
      while (!target[y]) {
        clock += chain.hold(y, rng);
        if (clock > t) break;
        y = chain.next(y, rng);
      }
      hits += target[y] ? 1 : 0;
    }
    return hits;
  });
  return stats::proportion_estimate(detail::sum(parts), cfg.samples);
}

// Closed-form hitting tail bounds. In each, mu_ball is the measure of the
// open resistance ball of radius delta around the start.

inline double bound_point_set(double R, double delta, double mu_ball, double t) {
  return 2.0 * (1.0 - (R - delta) / (R + delta) * std::exp(-2.0 * t / (mu_ball * (R - delta))));
}

inline double bound_ball(double R, double eps, double delta, double mu_ball, double t) {
  return 4.0 * (delta / (R - 2.0 * eps) + t / (mu_ball * (R - 2.0 * eps - delta)));
}

inline double bound_ball_complement(double Rc, double delta, double mu_ball, double t) {
  if (std::isinf(Rc)) return 0.0;
  return 4.0 * (delta / Rc + t / (mu_ball * (Rc - delta)));
}

enum class BoundKind { point_set, ball, ball_complement };

/// Target of a hitting tail query: a vertex set, the closed ball B(y, eps),
/// or the complement of the open ball of the given radius around the start.
struct HittingTarget {
  BoundKind kind = BoundKind::point_set;
  std::vector<Vertex> set;
  Vertex center = 0;
  double eps = 0.0;
  double radius = 0.0;
};

struct BoundCheck {
  stats::Estimate empirical;
  double bound = 0.0;

  bool holds(double sigmas = 3.0) const { return empirical.value <= bound + sigmas * empirical.std_error; }
};

inline void write_estimator_csv_header(std::ostream& os) { os << "statistic,value,stderr,oracle,bound\n"; }

inline void write_estimator_row(std::ostream& os, const std::string& name, const stats::Estimate& e,
                                std::optional<double> oracle, std::optional<double> bound) {
  os << name << ',' << format_double(e.value) << ',' << format_double(e.std_error) << ','
     << (oracle ? format_double(*oracle) : "") << ',' << (bound ? format_double(*bound) : "") << '\n';
}

namespace detail {
inline double open_ball_measure(const Network& net, const std::vector<double>& dist, double r) {
  double m = 0.0;
  for (Vertex v = 0; v < net.size(); ++v)
    if (dist[v] < r) m += net.measure(v);
  return m;
}
}  // namespace detail

/// Empirical P_x(sigma_target <= t) next to the matching closed-form bound.
inline BoundCheck hitting_tail_vs_bounds(const Network& net, Vertex x, const HittingTarget& target, double t,
                                         double delta, const SimulationConfig& cfg) {
  check_vertex(net, x);
  if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument("time must be finite and nonnegative");
  if (!(delta > 0.0)) throw InvalidArgument("delta must be positive");
  const auto dist = resistances_from(net, x);
  const double mu_ball = detail::open_ball_measure(net, dist, delta);
  std::vector<char> mask(net.size(), 0);
  BoundCheck out;
  switch (target.kind) {
    case BoundKind::point_set: {
      mask = detail::nonempty_mask(net, target.set);
      if (mask[x]) throw InvalidArgument("start vertex lies in the target set");
      const Vertex from[] = {x};
      const double R = set_resistance(net, from, target.set);
      if (!(delta < R)) throw InvalidArgument("delta must lie in (0, R(x, A))");
      out.bound = bound_point_set(R, delta, mu_ball, t);
      break;
    }
    case BoundKind::ball: {
      check_vertex(net, target.center);
      const double R = dist[target.center];
      if (!(target.eps > 0.0) || !(2.0 * target.eps < R)) throw InvalidArgument("eps must lie in (0, R(x, y)/2)");
      if (!(delta < R - 2.0 * target.eps)) throw InvalidArgument("delta must lie in (0, R(x, y) - 2 eps)");
      mask = closed_ball_mask(resistances_from(net, target.center), target.eps);
      out.bound = bound_ball(R, target.eps, delta, mu_ball, t);
      break;
    }
    case BoundKind::ball_complement: {
      if (!(target.radius > 0.0)) throw InvalidArgument("ball radius must be positive");
      const double Rc = ball_complement_resistance(net, x, target.radius);
      if (std::isinf(Rc)) {
        out.empirical = stats::proportion_estimate(0, std::max<std::size_t>(cfg.samples, 1));
        out.bound = 0.0;
        return out;
      }
      if (!(delta < Rc)) throw InvalidArgument("delta must lie in (0, R(x, B^c))");
      for (Vertex v = 0; v < net.size(); ++v) mask[v] = !(dist[v] < target.radius);
      out.bound = bound_ball_complement(Rc, delta, mu_ball, t);
      break;
    }
  }
  out.empirical = hit_by_time_probability(net, x, mask, t, cfg);
  return out;
}

/// Size of a greedy covering of the vertices by open resistance balls of
/// radius eps: repeatedly take the lowest-id uncovered vertex as a center.
inline std::size_t epsilon_net_size(const ResistanceMatrix& R, double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("net radius must be positive");
  const std::size_t n = R.size();
  std::vector<char> covered(n, 0);
  std::size_t centers = 0;
  for (std::size_t c = 0; c < n; ++c) {
    if (covered[c]) continue;
    ++centers;
    for (std::size_t v = 0; v < n; ++v)
      if (R(c, v) < eps) covered[v] = 1;
  }
  return centers;
}

/// Empirical P_x(sup_{s<=t} R(x, X_s) >= eps) next to the covering bound.
inline BoundCheck fluctuation_probability(const Network& net, Vertex x, double eps, double t, double delta,
                                          const SimulationConfig& cfg) {
  check_vertex(net, x);
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  if (!(delta > 0.0) || delta > eps / 8.0) throw InvalidArgument("delta must lie in (0, eps/8]");
  if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument("time must be finite and nonnegative");
  const ResistanceMatrix R = resistance_matrix(net);
  double inf_ball = std::numeric_limits<double>::infinity();
  for (Vertex c = 0; c < net.size(); ++c) {
    double m = 0.0;
    for (Vertex v = 0; v < net.size(); ++v)
      if (R(c, v) < delta) m += net.measure(v);
    inf_ball = std::min(inf_ball, m);
  }
  BoundCheck out;
  out.bound = 32.0 * static_cast<double>(epsilon_net_size(R, eps / 4.0)) / eps * (delta + t / inf_ball);
  std::vector<char> far(net.size(), 0);
  for (Vertex v = 0; v < net.size(); ++v) far[v] = R(x, v) >= eps;
  out.empirical = hit_by_time_probability(net, x, far, t, cfg);
  return out;
}

}  // namespace rfnet
