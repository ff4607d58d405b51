#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfnet/ensembles.hpp"
#include "rfnet/green.hpp"
#include "rfnet/mmspace.hpp"
#include "rfnet/network.hpp"
#include "rfnet/resistance.hpp"
#include "rfnet/sim.hpp"
#include "rfnet/stats.hpp"

namespace rfnet {

inline constexpr const char* kVersion = "rfnet 1.0.0";
inline constexpr int kReportSchema = 1;

// ---------------------------------------------------------------------------
// Identity suite

struct IdentityRow {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct IdentityOptions {
  double tolerance_scale = 1.0;
  double alpha = 1.0;
  /// Negative control: perturb one Green-kernel entry before checking.
  bool corrupt_kernel = false;
};

namespace detail {

/// h(x) = P_x(sigma_z < sigma_A) by a direct Dirichlet solve with h(z) = 1, h = 0 on A.
inline std::vector<double> hit_first_harmonic(const Network& net, Vertex z, const std::vector<char>& inA) {
  const std::size_t n = net.size();
  std::vector<char> fixed = inA;
  fixed[z] = 1;
  linalg::Subset free = linalg::all_but(n, fixed);
  std::vector<double> h(n, 0.0);
  h[z] = 1.0;
  if (free.size() == 0) return h;
  linalg::Vec rhs = linalg::Vec::Zero(static_cast<Eigen::Index>(free.size()));
  for (std::size_t i = 0; i < free.size(); ++i)
    rhs(static_cast<Eigen::Index>(i)) = net.conductance(free.members[i], z);
  linalg::DirichletSolver solver(net, free);
  const linalg::Vec u = solver.solve(rhs);
  for (std::size_t i = 0; i < free.size(); ++i) h[free.members[i]] = u(static_cast<Eigen::Index>(i));
  return h;
}

}  // namespace detail

/// Exact identity checks on one network, with A = {root} as the boundary.
inline std::vector<IdentityRow> run_identity_suite(const Network& net, const IdentityOptions& opt = {}) {
  const std::size_t n = net.size();
  std::vector<IdentityRow> rows;
  auto add = [&](std::string name, double residual, double tol) {
    tol *= opt.tolerance_scale;
    rows.push_back({std::move(name), residual, tol, std::isfinite(residual) && residual <= tol});
  };
  const ResistanceMatrix R = resistance_matrix(net);
  const Vertex rho = net.root();
  const Vertex A[] = {rho};
  const auto inA = linalg::mask_of(n, A);

  // Kernel from the resistance formula against the Dirichlet inverse.
  GreenKernel g = green_kernel(net, A, false);
  if (opt.corrupt_kernel) g.values(0, 0) += 1e-3 * std::max(1.0, std::abs(g.values(0, 0)));
  const linalg::Dense oracle = dirichlet_green_oracle(net, A);
  add("kernel_oracle", (g.values - oracle).cwiseAbs().maxCoeff(), 1e-9);

  double diag = 0.0, lip = 0.0;
  for (Vertex y : g.interior) {
    diag = std::max(diag, std::abs(g(y, y) - R(y, rho)));
    for (Vertex z : g.interior)
      for (Vertex w : g.interior) lip = std::max(lip, std::abs(g(y, z) - g(y, w)) - R(w, z));
  }
  add("kernel_diagonal", diag, 1e-9);
  add("kernel_lipschitz", std::max(0.0, lip), 1e-9);

  // Commute time against R(x, y) mu(F), all pairs on small nets.
  double commute = 0.0;
  for (Vertex x = 0; x < n; ++x)
    for (Vertex y = x + 1; y < n; ++y) {
      if (n > 15 && x != rho && y != rho) continue;
      commute = std::max(commute, std::abs(commute_time(net, x, y) - R(x, y) * net.total_mass()));
    }
  add("commute_time", commute, 1e-9);

  // Ball sandwich at a spread of radii around the root.
  double sandwich = 0.0;
  std::vector<double> radii;
  for (Vertex v = 0; v < n; ++v)
    if (v != rho) radii.push_back(R(rho, v));
  std::sort(radii.begin(), radii.end());
  for (double q : {0.25, 0.5, 0.75}) {
    const double eps = radii[static_cast<std::size_t>(q * static_cast<double>(radii.size() - 1))] * 0.999;
    if (eps > 0.0) sandwich = std::max(sandwich, kernel_ball_sandwich_check(net, rho, eps));
  }
  add("kernel_ball_sandwich", sandwich, 1e-9);

  // Hitting probabilities from the kernel against the harmonic solve and the
  // resistance form; exit local time mean against R(z, A) via escape probability.
  double est2 = 0.0, est1 = 0.0;
  for (Vertex z : g.interior) {
    const auto h = detail::hit_first_harmonic(net, z, inA);
    const double rz = R(z, rho);
    for (Vertex x : g.interior) {
      const double from_kernel = g(x, z) / g(z, z);
      const double from_resistance =
          x == z ? 1.0 : (R(x, rho) + rz - fused_resistance(net, A, x, z)) / (2.0 * rz);
      est2 = std::max({est2, std::abs(from_kernel - h[x]), std::abs(from_resistance - h[x])});
    }
    double escape = 0.0;
    for (const auto& nb : net.neighbors(z)) escape += nb.conductance * (1.0 - h[nb.vertex]);
    est1 = std::max(est1, std::abs(1.0 / escape - rz) / std::max(1.0, rz));
  }
  add("hitting_probability", est2, 1e-9);
  add("exit_local_time_mean", est1, 1e-9);

  // Resolvent equation G^a = G - a G G^a (as kernels acting against mu).
  const AlphaResolvent ra = alpha_resolvent_killed(net, A, opt.alpha);
  linalg::Dense M = linalg::Dense::Zero(g.values.rows(), g.values.cols());
  for (std::size_t i = 0; i < g.interior.size(); ++i)
    M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = net.measure(g.interior[i]);
  const linalg::Dense GaM = ra.kernel * M, GM = g.values * M;
  add("resolvent_equation", (GaM - (GM - opt.alpha * GM * GaM)).cwiseAbs().maxCoeff(), 1e-9);
  add("sub_markov", std::max(0.0, (opt.alpha * GaM.rowwise().sum()).maxCoeff() - 1.0), 1e-9);

  const Vertex other = rho == 0 ? 1 : 0;
  const AlphaResolvent full = alpha_resolvent_full(net, opt.alpha, rho, other);
  add("full_resolvent_decomposition", full.decomposition_gap, 1e-8);
  linalg::Vec mu(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) mu(static_cast<Eigen::Index>(i)) = net.measure(i);
  add("full_resolvent_conservative", ((opt.alpha * full.kernel * mu).array() - 1.0).abs().maxCoeff(), 1e-8);

  // Semigroup: rows, reversibility, semigroup property.
  const double s = 0.37, t = 1.13;
  const linalg::Dense ps = transition_semigroup(net, s), pt = transition_semigroup(net, t),
                      pst = transition_semigroup(net, s + t);
  double rowsum = 0.0, balance = 0.0;
  for (Eigen::Index x = 0; x < pt.rows(); ++x) {
    rowsum = std::max(rowsum, std::abs(pt.row(x).sum() - 1.0));
    for (Eigen::Index y = 0; y < pt.cols(); ++y)
      balance = std::max(balance, std::abs(mu(x) * pt(x, y) - mu(y) * pt(y, x)));
  }
  add("semigroup_rows", rowsum, 1e-10);
  add("detailed_balance", balance, 1e-10);
  add("semigroup_property", (ps * pt - pst).cwiseAbs().maxCoeff(), 1e-9);
  return rows;
}

inline bool all_passed(const std::vector<IdentityRow>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const IdentityRow& r) { return r.passed; });
}

inline void write_identity_csv(std::ostream& os, const std::vector<IdentityRow>& rows) {
  os << "identity,residual,tolerance,passed\n";
  for (const auto& r : rows)
    os << r.name << ',' << format_double(r.residual) << ',' << format_double(r.tolerance) << ','
       << (r.passed ? "true" : "false") << '\n';
}

// ---------------------------------------------------------------------------
// Ball spaces on large networks

namespace detail {

/// Closed resistance ball of radius r about the root as a metric measure
/// space. The metric among ball points is computed from the trace onto the
/// ball, which preserves resistances. Returns nothing if the ball has more
/// than max_points points.
inline std::optional<FiniteMMSpace> ball_space(const Network& net, const std::vector<double>& dist, double r,
                                               std::size_t max_points) {
  std::vector<Vertex> ball;
  for (Vertex v = 0; v < net.size(); ++v)
    if (dist[v] <= r) ball.push_back(v);
  if (ball.size() > max_points) return std::nullopt;
  FiniteMMSpace X;
  const auto k = static_cast<Eigen::Index>(ball.size());
  X.metric = linalg::Dense::Zero(k, k);
  X.root = static_cast<std::size_t>(std::find(ball.begin(), ball.end(), net.root()) - ball.begin());
  for (Vertex v : ball) {
    X.ids.push_back(net.label(v));
    X.weights.push_back(net.measure(v));
  }
  if (ball.size() >= 2) {
    std::vector<double> nu(X.weights);
    const Network traced = trace_network(net, ball, nu);
    X.metric = resistance_matrix(traced).values;
  }
  return X;
}

inline std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& body) {
  std::ofstream f(p);
  if (!f) throw Error("cannot write " + p.string());
  f << body;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convergence pipeline

/// Rescaling: distances by n^{-alpha_R}, masses by n^{-alpha_mu}, times by
/// n^{alpha_t} (a rescaled time t is original time t n^{alpha_t}), host
/// coordinates by n^{-alpha_phi}.
struct ExperimentPlan {
  std::vector<std::string> ensembles;
  /// Scale parameter n of each ensemble; parsed from `n=`, `size=` or `steps=` when empty.
  std::vector<double> scales;
  double alpha_R = 0.0;
  double alpha_mu = 0.0;
  double alpha_t = 0.0;
  double alpha_phi = 0.0;
  std::vector<double> radii{1, 2, 4, 8, 16, 32};
  std::vector<double> times{1.0, 4.0};
  std::vector<double> functional_scales{1.0, 4.0, 16.0};
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  std::size_t ghp_budget = 200;
  std::size_t max_ball_points = 300;
  std::size_t identity_points = 10;
  double tolerance_scale = 1.0;
  std::string out_dir;

  void validate() const {
    if (ensembles.empty()) throw InvalidArgument("plan needs at least one ensemble");
    if (!scales.empty() && scales.size() != ensembles.size())
      throw InvalidArgument("plan needs one scale per ensemble");
    for (double a : {alpha_R, alpha_mu, alpha_t, alpha_phi})
      if (!std::isfinite(a)) throw InvalidArgument("rescaling exponents must be finite");
    if (radii.empty()) throw InvalidArgument("radii grid is empty");
    for (std::size_t j = 0; j < radii.size(); ++j)
      if (!(radii[j] > 0.0) || (j > 0 && !(radii[j] > radii[j - 1])))
        throw InvalidArgument("radii must be positive and strictly increasing");
    if (times.empty()) throw InvalidArgument("plan needs at least one fdd time");
    for (std::size_t j = 0; j < times.size(); ++j)
      if (!(times[j] >= 0.0) || (j > 0 && !(times[j] > times[j - 1])))
        throw InvalidArgument("fdd times must be nonnegative and strictly increasing");
    if (samples == 0) throw InvalidArgument("sample count must be positive");
    for (double s : functional_scales)
      if (!(s > 0.0)) throw InvalidArgument("functional scales must be positive");
  }
};

/// Matched-moment summary of the distance-to-root fdd: for each scale s,
/// E exp(-d_j / s) for every time j and E exp(-sum_j d_j / s).
struct FddFunctionals {
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<double> errors;
};

struct CauchyGap {
  std::string from, to;
  double gap = 0.0;
  double error = 0.0;
};

struct ExperimentReport {
  nlohmann::json json;
  GrowthProfile growth;
  std::vector<FddFunctionals> fdd;
  std::vector<CauchyGap> successive;
  std::vector<CauchyGap> to_largest;
  bool growth_fails = false;
  bool cauchy_decreasing = false;
  bool identities_pass = true;
};

namespace detail {

inline double scale_of(const Ensemble& e) {
  for (const char* key : {"n", "size", "steps", "level"}) {
    auto it = e.params.find(key);
    if (it != e.params.end()) return parse_double(it->second);
  }
  return static_cast<double>(e.net.size());
}

/// Distance-to-root samples at the given original times, one row per sample.
inline FddFunctionals fdd_functionals(const Network& net, const std::vector<double>& dist, double metric_factor,
                                      const std::vector<double>& times, const std::vector<double>& scales,
                                      const SimulationConfig& cfg) {
  JumpChain chain(net);
  const std::size_t K = times.size(), S = scales.size();
  const std::size_t F = S * (K + 1);
  struct Sums {
    std::vector<double> sum, sq;
  };
  auto parts = run_chunks(cfg, cfg.samples, [&](StreamRng& rng, std::size_t count) {
    Sums s{std::vector<double>(F, 0.0), std::vector<double>(F, 0.0)};
    std::vector<double> d(K);
    for (std::size_t i = 0; i < count; ++i) {
      double t = 0.0;
      Vertex x = net.root();
      double h = chain.hold(x, rng);
      for (std::size_t k = 0; k < K; ++k) {
        while (t + h <= times[k]) {
          t += h;
          x = chain.next(x, rng);
          h = chain.hold(x, rng);
        }
        d[k] = metric_factor * dist[x];
      }
      for (std::size_t a = 0; a < S; ++a) {
        double total = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          const double v = std::exp(-d[k] / scales[a]);
          s.sum[a * (K + 1) + k] += v;
          s.sq[a * (K + 1) + k] += v * v;
          total += d[k];
        }
        const double v = std::exp(-total / scales[a]);
        s.sum[a * (K + 1) + K] += v;
        s.sq[a * (K + 1) + K] += v * v;
      }
    }
    return s;
  });
  FddFunctionals out;
  std::vector<double> sum(F, 0.0), sq(F, 0.0);
  for (const auto& p : parts)
    for (std::size_t f = 0; f < F; ++f) {
      sum[f] += p.sum[f];
      sq[f] += p.sq[f];
    }
  const double N = static_cast<double>(cfg.samples);
  for (std::size_t a = 0; a < S; ++a)
    for (std::size_t k = 0; k <= K; ++k) {
      const std::size_t f = a * (K + 1) + k;
      out.names.push_back((k < K ? "t" + std::to_string(k) : std::string("joint")) + "_s" + format_double(scales[a]));
      const double m = sum[f] / N;
      out.values.push_back(m);
      out.errors.push_back(std::sqrt(std::max(0.0, sq[f] / N - m * m) / N));
    }
  return out;
}

inline CauchyGap functional_gap(const std::string& a, const FddFunctionals& fa, const std::string& b,
                                const FddFunctionals& fb) {
  CauchyGap g{a, b, 0.0, 0.0};
  for (std::size_t f = 0; f < fa.values.size(); ++f) {
    const double d = std::abs(fa.values[f] - fb.values[f]);
    if (d >= g.gap) {
      g.gap = d;
      g.error = std::hypot(fa.errors[f], fb.errors[f]);
    }
  }
  return g;
}

}  // namespace detail

inline ExperimentReport run_convergence(const ExperimentPlan& plan) {
  plan.validate();
  ExperimentReport rep;
  auto& j = rep.json;
  j["schema"] = kReportSchema;
  j["provenance"] = {{"version", kVersion}, {"seed", plan.seed}, {"ensembles", plan.ensembles},
                     {"timestamp", detail::iso_timestamp()}};
  j["plan"] = {{"alpha_R", plan.alpha_R}, {"alpha_mu", plan.alpha_mu}, {"alpha_t", plan.alpha_t},
               {"alpha_phi", plan.alpha_phi}, {"radii", plan.radii}, {"times", plan.times},
               {"functional_scales", plan.functional_scales}, {"samples", plan.samples}};
  j["labels"] = {{"convergence", "Cauchy criterion along n; continuum limits are not computed"},
                 {"ghp", "correspondence surrogate; exhaustive for at most 6 points, otherwise an upper bound"}};

  std::vector<Ensemble> ens;
  std::vector<double> scales;
  for (std::size_t i = 0; i < plan.ensembles.size(); ++i) {
    ens.push_back(make_ensemble(plan.ensembles[i]));
    scales.push_back(plan.scales.empty() ? detail::scale_of(ens.back()) : plan.scales[i]);
  }
  const std::size_t last = ens.size() - 1;
  std::vector<std::vector<double>> dist;
  for (const auto& e : ens) dist.push_back(resistances_from(e.net, e.net.root()));
  auto metric_factor = [&](std::size_t i) { return std::pow(scales[i], -plan.alpha_R); };
  auto mass_factor = [&](std::size_t i) { return std::pow(scales[i], -plan.alpha_mu); };
  auto time_factor = [&](std::size_t i) { return std::pow(scales[i], plan.alpha_t); };

  // Growth profile in rescaled units.
  rep.growth.radii = plan.radii;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    rep.growth.names.push_back(format_double(scales[i]));
    std::vector<double> row;
    for (double r : plan.radii)
      row.push_back(metric_factor(i) * ball_complement_resistance(ens[i].net, ens[i].net.root(), r / metric_factor(i)));
    rep.growth.values.push_back(std::move(row));
  }
  {
    rep.growth.proxy.assign(plan.radii.size(), -std::numeric_limits<double>::infinity());
    for (const auto& row : rep.growth.values)
      for (std::size_t k = 0; k < row.size(); ++k)
        if (std::isfinite(row[k])) rep.growth.proxy[k] = std::max(rep.growth.proxy[k], row[k]);
    std::vector<double> lx, ly;
    for (std::size_t k = plan.radii.size() / 2; k < plan.radii.size(); ++k)
      if (std::isfinite(rep.growth.proxy[k]) && rep.growth.proxy[k] > 0.0) {
        lx.push_back(std::log(plan.radii[k]));
        ly.push_back(std::log(rep.growth.proxy[k]));
      }
    if (lx.size() >= 2) {
      rep.growth.upper_slope = stats::fit_line(lx, ly).slope;
      rep.growth.growth_fails = rep.growth.upper_slope < 0.25;
    }
  }
  rep.growth_fails = rep.growth.growth_fails;
  j["growth"] = {{"proxy", rep.growth.proxy}, {"upper_slope", rep.growth.upper_slope},
                 {"assumption_growth_fails", rep.growth_fails}};

  // GHP surrogate of each ball to the largest-n ball.
  nlohmann::json ghp = nlohmann::json::array();
  std::ostringstream ghp_csv;
  ghp_csv << "n,r,value,exact,points\n";
  for (double r : plan.radii) {
    auto limit = detail::ball_space(ens[last].net, dist[last], r / metric_factor(last), plan.max_ball_points);
    for (std::size_t i = 0; i < ens.size(); ++i) {
      auto ball = detail::ball_space(ens[i].net, dist[i], r / metric_factor(i), plan.max_ball_points);
      nlohmann::json cell = {{"n", scales[i]}, {"r", r}};
      if (!ball || !limit) {
        cell["skipped"] = "ball exceeds max_ball_points";
      } else {
        const auto X = rescaled(*ball, metric_factor(i), mass_factor(i));
        const auto Y = rescaled(*limit, metric_factor(last), mass_factor(last));
        const GhpResult res = ghp_search(X, Y, plan.ghp_budget, plan.seed);
        cell["value"] = res.value;
        cell["exact"] = res.exact;
        cell["points"] = X.size();
        ghp_csv << format_double(scales[i]) << ',' << format_double(r) << ',' << format_double(res.value) << ','
                << (res.exact ? "true" : "false") << ',' << X.size() << '\n';
      }
      ghp.push_back(cell);
    }
  }
  j["ghp_to_largest"] = ghp;

  // Distance-to-root fdd functionals.
  std::ostringstream fdd_csv;
  fdd_csv << "n,functional,value,stderr\n";
  for (std::size_t i = 0; i < ens.size(); ++i) {
    std::vector<double> times;
    for (double t : plan.times) times.push_back(t * time_factor(i));
    SimulationConfig cfg{plan.seed, 1000 + i, plan.samples, plan.jobs};
    rep.fdd.push_back(detail::fdd_functionals(ens[i].net, dist[i], metric_factor(i), times, plan.functional_scales, cfg));
    for (std::size_t f = 0; f < rep.fdd.back().values.size(); ++f)
      fdd_csv << format_double(scales[i]) << ',' << rep.fdd.back().names[f] << ','
              << format_double(rep.fdd.back().values[f]) << ',' << format_double(rep.fdd.back().errors[f]) << '\n';
  }
  std::ostringstream cauchy_csv;
  cauchy_csv << "kind,from,to,gap,stderr\n";
  for (std::size_t i = 0; i + 1 < ens.size(); ++i) {
    rep.successive.push_back(detail::functional_gap(format_double(scales[i]), rep.fdd[i],
                                                    format_double(scales[i + 1]), rep.fdd[i + 1]));
    rep.to_largest.push_back(
        detail::functional_gap(format_double(scales[i]), rep.fdd[i], format_double(scales[last]), rep.fdd[last]));
  }
  rep.cauchy_decreasing = rep.successive.size() >= 2;
  for (std::size_t i = 1; i < rep.successive.size(); ++i)
    rep.cauchy_decreasing = rep.cauchy_decreasing &&
                            rep.successive[i].gap <= rep.successive[i - 1].gap + 3.0 * std::hypot(rep.successive[i].error,
                                                                                                  rep.successive[i - 1].error);
  nlohmann::json gaps = nlohmann::json::array();
  for (const auto& [kind, list] : {std::pair{"successive", &rep.successive}, std::pair{"to_largest", &rep.to_largest}})
    for (const auto& g : *list) {
      gaps.push_back({{"kind", kind}, {"from", g.from}, {"to", g.to}, {"gap", g.gap}, {"stderr", g.error}});
      cauchy_csv << kind << ',' << g.from << ',' << g.to << ',' << format_double(g.gap) << ',' << format_double(g.error)
                 << '\n';
    }
  j["fdd_cauchy"] = {{"gaps", gaps}, {"successive_decreasing", rep.cauchy_decreasing}};

  // Identity residuals on a small trace around the root of each network.
  nlohmann::json ids = nlohmann::json::array();
  std::ostringstream id_csv;
  id_csv << "n,identity,residual,tolerance,passed\n";
  for (std::size_t i = 0; i < ens.size(); ++i) {
    std::vector<Vertex> order(ens[i].net.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Vertex a, Vertex b) { return dist[i][a] < dist[i][b]; });
    order.resize(std::min(order.size(), std::max<std::size_t>(plan.identity_points, 2)));
    std::sort(order.begin(), order.end());
    std::vector<double> nu;
    for (Vertex v : order) nu.push_back(ens[i].net.measure(v));
    const Network sub = trace_network(ens[i].net, order, nu);
    const auto rows = run_identity_suite(sub, {plan.tolerance_scale, 1.0, false});
    rep.identities_pass = rep.identities_pass && all_passed(rows);
    for (const auto& r : rows) {
      ids.push_back({{"n", scales[i]}, {"identity", r.name}, {"residual", r.residual}, {"passed", r.passed}});
      id_csv << format_double(scales[i]) << ',' << r.name << ',' << format_double(r.residual) << ','
             << format_double(r.tolerance) << ',' << (r.passed ? "true" : "false") << '\n';
    }
  }
  j["identities"] = {{"rows", ids}, {"all_passed", rep.identities_pass}};

  if (!plan.out_dir.empty()) {
    const std::filesystem::path dir(plan.out_dir);
    std::filesystem::create_directories(dir);
    std::ostringstream growth_csv;
    write_profile_csv(growth_csv, rep.growth);
    detail::write_text(dir / "growth.csv", growth_csv.str());
    detail::write_text(dir / "ghp.csv", ghp_csv.str());
    detail::write_text(dir / "fdd.csv", fdd_csv.str());
    detail::write_text(dir / "cauchy.csv", cauchy_csv.str());
    detail::write_text(dir / "identities.csv", id_csv.str());
    detail::write_text(dir / "report.json", j.dump(2) + "\n");
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Fusing

namespace detail {

/// Classes generated by the marked pairs (pairs sharing a point merge).
inline std::vector<std::vector<Vertex>> pair_classes(std::size_t n, const std::vector<std::pair<Vertex, Vertex>>& pairs) {
  DisjointSets ds(n);
  for (auto [a, b] : pairs) {
    if (a >= n || b >= n) throw InvalidArgument("marked pair refers to a missing vertex");
    if (a == b) throw InvalidArgument("marked pair has coincident points");
    ds.unite(a, b);
  }
  std::map<std::size_t, std::vector<Vertex>> by_root;
  for (const auto& p : pairs) by_root[ds.find(p.first)];
  for (Vertex v = 0; v < n; ++v) {
    auto it = by_root.find(ds.find(v));
    if (it != by_root.end()) it->second.push_back(v);
  }
  std::vector<std::vector<Vertex>> out;
  for (auto& [r, members] : by_root) out.push_back(std::move(members));
  return out;
}

}  // namespace detail

struct CommutationResult {
  double residual = 0.0;
  std::size_t classes = 0;
  std::vector<std::string> warnings;
};

/// Compares fuse-then-trace against trace-then-fuse on a kept set V that
/// contains the root and every marked point. The traced network is rebuilt
/// from its resistance matrix before fusing.
inline CommutationResult fuse_trace_commutation(const Network& net, const std::vector<std::pair<Vertex, Vertex>>& pairs,
                                                std::vector<Vertex> V) {
  const std::size_t n = net.size();
  std::sort(V.begin(), V.end());
  V.erase(std::unique(V.begin(), V.end()), V.end());
  auto inV = linalg::mask_of(n, V);
  if (!inV[net.root()]) throw InvalidArgument("kept set must contain the root");
  for (auto [a, b] : pairs)
    if (!inV[a] || !inV[b]) throw InvalidArgument("kept set must contain every marked point");
  const auto classes = detail::pair_classes(n, pairs);

  // Fuse, then trace onto the image of V.
  const FusedNetwork fused = fuse_network(net, classes);
  std::vector<Vertex> image;
  for (Vertex v : V) image.push_back(fused.projection[v]);
  std::sort(image.begin(), image.end());
  image.erase(std::unique(image.begin(), image.end()), image.end());
  if (image.size() < 2)  // both sides are the same one-point space
    return {0.0, classes.size(), {"kept set fuses to a single point"}};
  std::vector<double> nu_image;
  for (Vertex c : image) nu_image.push_back(fused.net.measure(c));
  const Network a = trace_network(fused.net, image, nu_image);

  // Trace onto V, rebuild from resistances, then fuse the same classes.
  std::vector<double> nu;
  for (Vertex v : V) nu.push_back(net.measure(v));
  const Network traced = trace_network(net, V, nu);
  ResistanceMatrix RV = resistance_matrix(traced);
  const std::size_t base = static_cast<std::size_t>(std::find(V.begin(), V.end(), net.root()) - V.begin());
  Reconstruction rebuilt = resistance_to_network(RV, base, nu);
  std::vector<std::ptrdiff_t> pos(n, -1);
  for (std::size_t i = 0; i < V.size(); ++i) pos[V[i]] = static_cast<std::ptrdiff_t>(i);
  std::vector<std::vector<Vertex>> local_classes;
  for (const auto& c : classes) {
    std::vector<Vertex> lc;
    for (Vertex v : c)
      if (pos[v] >= 0) lc.push_back(static_cast<Vertex>(pos[v]));
    if (!lc.empty()) local_classes.push_back(std::move(lc));
  }
  const FusedNetwork b = fuse_network(rebuilt.net, local_classes);

  // Match vertices of the two results through V.
  const std::size_t k = image.size();
  if (b.net.size() != k) throw Error("fused traces have different sizes");
  std::vector<std::size_t> a_of_b(k);
  for (std::size_t i = 0; i < V.size(); ++i) {
    const auto ai = static_cast<std::size_t>(std::lower_bound(image.begin(), image.end(), fused.projection[V[i]]) - image.begin());
    a_of_b[b.projection[i]] = ai;
  }
  const linalg::Dense La = linalg::dense_laplacian(a), Lb = linalg::dense_laplacian(b.net);
  double residual = 0.0;
  for (std::size_t x = 0; x < k; ++x) {
    residual = std::max(residual, std::abs(a.measure(a_of_b[x]) - b.net.measure(x)));
    for (std::size_t y = 0; y < k; ++y)
      residual = std::max(residual, std::abs(La(static_cast<Eigen::Index>(a_of_b[x]), static_cast<Eigen::Index>(a_of_b[y])) -
                                             Lb(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y))));
  }
  return {residual, classes.size(), std::move(rebuilt.warnings)};
}

struct FusingInstance {
  std::string name;
  Network net;
  std::vector<std::pair<Vertex, Vertex>> pairs;
};

struct FusingRow {
  std::string name;
  std::size_t vertices = 0;
  std::size_t pairs = 0;
  std::size_t fused_vertices = 0;
  double commutation_residual = 0.0;
  std::optional<double> distance_before;
  std::optional<double> distance_after;
};

struct FusingReport {
  std::vector<FusingRow> rows;
  nlohmann::json json;
  bool passed = true;
};

/// For each instance: fuse along the marked pairs, check fuse/trace
/// commutation on a kept set, and report surrogate distances of root balls
/// to the last instance before and after fusing.
inline FusingReport run_fusing_experiment(const std::vector<FusingInstance>& instances, double radius,
                                          std::uint64_t seed, double tolerance_scale = 1.0,
                                          std::size_t max_ball_points = 60, std::size_t budget = 200) {
  if (instances.empty()) throw InvalidArgument("fusing experiment needs instances");
  FusingReport rep;
  auto fused_of = [](const FusingInstance& in) {
    return in.pairs.empty() ? FusedNetwork{in.net, {}} : fuse_network(in.net, detail::pair_classes(in.net.size(), in.pairs));
  };
  auto ball_of = [&](const Network& net) {
    return detail::ball_space(net, resistances_from(net, net.root()), radius, max_ball_points);
  };
  const auto& lim = instances.back();
  const auto lim_before = ball_of(lim.net);
  const auto lim_after = ball_of(fused_of(lim).net);
  StreamRng rng(seed, 0xf05e);
  for (const auto& in : instances) {
    FusingRow row;
    row.name = in.name;
    row.vertices = in.net.size();
    row.pairs = in.pairs.size();
    const FusedNetwork f = fused_of(in);
    row.fused_vertices = f.net.size();
    if (in.net.size() <= detail::kDenseLimit) {
      std::vector<Vertex> V{in.net.root()};
      for (auto [a, b] : in.pairs) {
        V.push_back(a);
        V.push_back(b);
      }
      for (Vertex v = 0; v < in.net.size(); ++v)
        if (rng.bernoulli(0.3)) V.push_back(v);
      row.commutation_residual = fuse_trace_commutation(in.net, in.pairs, V).residual;
    }
    auto before = ball_of(in.net), after = ball_of(f.net);
    if (before && lim_before) row.distance_before = ghp_search(*before, *lim_before, budget, seed).value;
    if (after && lim_after) row.distance_after = ghp_search(*after, *lim_after, budget, seed).value;
    rep.passed = rep.passed && row.commutation_residual <= 1e-9 * tolerance_scale;
    nlohmann::json r = {{"name", row.name},
                        {"vertices", row.vertices},
                        {"pairs", row.pairs},
                        {"fused_vertices", row.fused_vertices},
                        {"commutation_residual", row.commutation_residual}};
    if (row.distance_before) r["distance_before"] = *row.distance_before;
    if (row.distance_after) r["distance_after"] = *row.distance_after;
    rep.json["rows"].push_back(r);
    rep.rows.push_back(std::move(row));
  }
  rep.json["passed"] = rep.passed;
  rep.json["provenance"] = {{"version", kVersion}, {"seed", seed}, {"timestamp", detail::iso_timestamp()}};
  return rep;
}

}  // namespace rfnet
