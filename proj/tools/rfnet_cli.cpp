// rfnet: command-line front end for resistance networks.
//
// Exit codes: 0 success, 1 a check or bound failed, 2 bad input.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rfnet/rfnet.hpp"

namespace {

using namespace rfnet;

struct Globals {
  std::uint64_t seed = 1;
  std::string out;
  unsigned jobs = 1;
  double tolerance_scale = 1.0;
};

/// Output sink: the --out file when given, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw Error("cannot open " + path + " for writing");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// A network from a file in the network schema, or an ensemble spec string.
Network load_network(const std::string& source) {
  std::ifstream probe(source);
  if (probe) {
    std::istringstream is(slurp(source));
    return read_network(is);
  }
  return make_ensemble(source).net;
}

FiniteMMSpace load_space(const std::string& source) {
  std::ifstream probe(source);
  if (probe) {
    const std::string text = slurp(source);
    std::istringstream is(text);
    if (text.find("network v1") != std::string::npos && text.find("mmspace v1") == std::string::npos)
      return from_network(read_network(is));
    return read_mmspace(is);
  }
  return from_network(make_ensemble(source).net);
}

std::vector<std::string> split(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);)
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<Vertex> vertices(const Network& net, const std::string& list) {
  std::vector<Vertex> out;
  for (const auto& id : split(list)) out.push_back(net.index_of(id));
  return out;
}

std::vector<double> numbers(const std::string& list) {
  std::vector<double> out;
  for (const auto& s : split(list)) out.push_back(parse_double(s));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Resistance networks: generation, kernels, simulation, metric-measure comparisons"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "RNG seed")->capture_default_str();
  app.add_option("--out", g.out, "Output file (output directory for converge)");
  app.add_option("--jobs", g.jobs, "Worker threads for Monte Carlo")->capture_default_str();
  app.add_option("--tolerance-scale", g.tolerance_scale, "Multiplier on every check tolerance")->capture_default_str();

  int status = 0;

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a network from an ensemble spec");
  std::string gen_spec;
  gen->add_option("spec", gen_spec, "e.g. fig1:n=1000,variant=sqrt")->required();
  gen->callback([&] {
    Sink sink(g.out);
    write_network(sink.stream(), make_ensemble(gen_spec).net);
  });

  // resistance
  auto* res = app.add_subcommand("resistance", "Effective resistances");
  std::string res_in, res_pair, res_from, res_set_a, res_set_b;
  res->add_option("network", res_in, "Network file or ensemble spec")->required();
  res->add_option("--pair", res_pair, "Two vertex ids x,y");
  res->add_option("--from", res_from, "R(x, .) for every vertex");
  res->add_option("--set-a", res_set_a, "Set A for R(A, B)");
  res->add_option("--set-b", res_set_b, "Set B for R(A, B)");
  res->callback([&] {
    const Network net = load_network(res_in);
    Sink sink(g.out);
    auto& os = sink.stream();
    if (!res_pair.empty()) {
      const auto p = vertices(net, res_pair);
      if (p.size() != 2) throw InvalidArgument("--pair needs exactly two ids");
      os << format_double(effective_resistance(net, p[0], p[1])) << '\n';
    } else if (!res_from.empty()) {
      const Vertex x = net.index_of(res_from);
      const auto d = resistances_from(net, x);
      os << "vertex,resistance\n";
      for (Vertex v = 0; v < net.size(); ++v) os << net.label(v) << ',' << format_double(d[v]) << '\n';
    } else if (!res_set_a.empty() || !res_set_b.empty()) {
      os << format_double(set_resistance(net, vertices(net, res_set_a), vertices(net, res_set_b))) << '\n';
    } else {
      const auto R = resistance_matrix(net);
      write_csv(os, R.labels, R.values);
    }
  });

  // green
  auto* green = app.add_subcommand("green", "Killed Green kernel g_A over V \\ A");
  std::string green_in, green_boundary;
  green->add_option("network", green_in, "Network file or ensemble spec")->required();
  green->add_option("--boundary", green_boundary, "Boundary set A")->required();
  green->callback([&] {
    const Network net = load_network(green_in);
    const auto A = vertices(net, green_boundary);
    const GreenKernel k = green_kernel(net, A, true);
    std::vector<std::string> labels;
    for (Vertex v : k.interior) labels.push_back(net.label(v));
    Sink sink(g.out);
    write_csv(sink.stream(), labels, k.values);
    std::cerr << "oracle_gap " << format_double(k.oracle_gap) << '\n';
    if (!(k.oracle_gap <= 1e-9 * g.tolerance_scale)) status = 1;
  });

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate the process; path, fdd law or hitting bounds");
  std::string sim_in, sim_start, sim_times, sim_target, sim_kind = "path";
  double sim_horizon = 1.0, sim_delta = 0.0, sim_eps = 0.0, sim_radius = 0.0;
  std::size_t sim_samples = 100000;
  std::uint64_t sim_stream = 0;
  sim->add_option("network", sim_in, "Network file or ensemble spec")->required();
  sim->add_option("--start", sim_start, "Start vertex (default: root)");
  sim->add_option("--mode", sim_kind, "path | fdd | point-set | ball | ball-complement | fluctuation")->capture_default_str();
  sim->add_option("--horizon", sim_horizon, "Path horizon or bound time t")->capture_default_str();
  sim->add_option("--times", sim_times, "Increasing fdd times t1,t2,...");
  sim->add_option("--samples", sim_samples, "Monte-Carlo sample count")->capture_default_str();
  sim->add_option("--stream", sim_stream, "RNG stream id")->capture_default_str();
  sim->add_option("--target", sim_target, "Target set (point-set) or ball centre (ball)");
  sim->add_option("--delta", sim_delta, "delta of the bound");
  sim->add_option("--eps", sim_eps, "eps of the ball or fluctuation bound");
  sim->add_option("--radius", sim_radius, "Ball radius for ball-complement");
  sim->callback([&] {
    const Network net = load_network(sim_in);
    const Vertex x0 = sim_start.empty() ? net.root() : net.index_of(sim_start);
    const SimulationConfig cfg{g.seed, sim_stream, sim_samples, g.jobs};
    Sink sink(g.out);
    auto& os = sink.stream();
    if (sim_kind == "path") {
      write_path_csv(os, net, simulate_path(net, x0, sim_horizon, cfg));
      return;
    }
    if (sim_kind == "fdd") {
      const auto times = numbers(sim_times);
      const EmpiricalLaw law = estimate_fdd(net, x0, times, cfg);
      std::optional<linalg::Dense> exact;
      if (times.size() <= 2) exact = exact_fdd(net, x0, times);
      write_estimator_csv_header(os);
      for (const auto& [tuple, count] : law.counts) {
        std::string name = "P(";
        for (std::size_t k = 0; k < tuple.size(); ++k) name += (k ? " " : "") + net.label(tuple[k]);
        name += ")";
        const auto e = stats::proportion_estimate(count, law.samples);
        std::optional<double> oracle;
        if (exact) {
          oracle = tuple.size() == 1 ? (*exact)(0, static_cast<Eigen::Index>(tuple[0]))
                                     : (*exact)(static_cast<Eigen::Index>(tuple[0]), static_cast<Eigen::Index>(tuple[1]));
        }
        write_estimator_row(os, name, e, oracle, std::nullopt);
      }
      if (exact) {
        const double tv = fdd_total_variation(net, x0, law);
        const std::size_t cells = times.size() == 1 ? net.size() : net.size() * net.size();
        const double band = stats::tv_band(cells, law.samples) * g.tolerance_scale;
        write_estimator_row(os, "total_variation", {tv, 0.0, law.samples}, 0.0, band);
        if (tv > band) status = 1;
      }
      return;
    }
    BoundCheck check;
    if (sim_kind == "fluctuation") {
      check = fluctuation_probability(net, x0, sim_eps, sim_horizon, sim_delta, cfg);
    } else {
      HittingTarget target;
      if (sim_kind == "point-set") {
        target.kind = BoundKind::point_set;
        target.set = vertices(net, sim_target);
      } else if (sim_kind == "ball") {
        target.kind = BoundKind::ball;
        target.center = net.index_of(sim_target);
        target.eps = sim_eps;
      } else if (sim_kind == "ball-complement") {
        target.kind = BoundKind::ball_complement;
        target.radius = sim_radius;
      } else {
        throw InvalidArgument("unknown simulate mode '" + sim_kind + "'");
      }
      check = hitting_tail_vs_bounds(net, x0, target, sim_horizon, sim_delta, cfg);
    }
    write_estimator_csv_header(os);
    write_estimator_row(os, sim_kind, check.empirical, std::nullopt, check.bound);
    if (!check.holds(3.0 * g.tolerance_scale)) status = 1;
  });

  // trace
  auto* trace = app.add_subcommand("trace", "Trace (Schur complement) onto a vertex subset");
  std::string trace_in, trace_keep, trace_nu, trace_root;
  trace->add_option("network", trace_in, "Network file or ensemble spec")->required();
  trace->add_option("--keep", trace_keep, "Kept set V")->required();
  trace->add_option("--nu", trace_nu, "Measure on V, in the order of --keep (default: mu restricted)");
  trace->add_option("--root", trace_root, "New root inside V when the old one is not kept");
  trace->callback([&] {
    const Network net = load_network(trace_in);
    const auto V = vertices(net, trace_keep);
    std::vector<double> nu = trace_nu.empty() ? std::vector<double>{} : numbers(trace_nu);
    if (nu.empty())
      for (Vertex v : V) nu.push_back(net.measure(v));
    std::optional<Vertex> root;
    if (!trace_root.empty()) root = net.index_of(trace_root);
    Sink sink(g.out);
    write_network(sink.stream(), trace_network(net, V, nu, root));
  });

  // fuse
  auto* fuse = app.add_subcommand("fuse", "Fuse vertex classes to points");
  std::string fuse_in;
  std::vector<std::string> fuse_parts;
  fuse->add_option("network", fuse_in, "Network file or ensemble spec")->required();
  fuse->add_option("--part", fuse_parts, "A class to fuse, e.g. --part a,b (repeatable)")->required();
  fuse->callback([&] {
    const Network net = load_network(fuse_in);
    std::vector<std::vector<Vertex>> parts;
    for (const auto& p : fuse_parts) parts.push_back(vertices(net, p));
    Sink sink(g.out);
    write_network(sink.stream(), fuse_network(net, parts).net);
  });

  // ghp
  auto* ghp = app.add_subcommand("ghp", "Correspondence surrogate distance between two pointed spaces");
  std::string ghp_a, ghp_b;
  std::size_t ghp_budget = 200;
  double ghp_radius = -1.0;
  ghp->add_option("first", ghp_a, "mmspace file, network file or ensemble spec")->required();
  ghp->add_option("second", ghp_b, "mmspace file, network file or ensemble spec")->required();
  ghp->add_option("--budget", ghp_budget, "Heuristic search budget")->capture_default_str();
  ghp->add_option("--radius", ghp_radius, "Restrict both to the closed root ball first");
  ghp->callback([&] {
    FiniteMMSpace X = load_space(ghp_a), Y = load_space(ghp_b);
    if (ghp_radius >= 0.0) {
      X = restrict_ball(X, ghp_radius);
      Y = restrict_ball(Y, ghp_radius);
    }
    const GhpResult r = ghp_search(X, Y, ghp_budget, g.seed);
    nlohmann::json j = {{"value", r.value}, {"exact", r.exact}, {"label", r.exact ? "exact" : "upper bound"}};
    for (auto [a, b] : r.best) j["correspondence"].push_back({X.ids[a], Y.ids[b]});
    Sink sink(g.out);
    sink.stream() << j.dump(2) << '\n';
  });

  // growth
  auto* growth = app.add_subcommand("growth", "Resistance growth profile R(rho, B(rho, r)^c)");
  std::vector<std::string> growth_in;
  std::string growth_radii = "1,2,4,8,16,32";
  growth->add_option("networks", growth_in, "Network files or ensemble specs, in increasing n")->required();
  growth->add_option("--radii", growth_radii, "Strictly increasing radii")->capture_default_str();
  growth->callback([&] {
    std::vector<Network> nets;
    for (const auto& s : growth_in) nets.push_back(load_network(s));
    std::vector<std::pair<std::string, const Network*>> named;
    for (std::size_t i = 0; i < nets.size(); ++i) named.emplace_back(growth_in[i], &nets[i]);
    const GrowthProfile p = resistance_growth_profile(named, numbers(growth_radii));
    Sink sink(g.out);
    write_profile_csv(sink.stream(), p);
    std::cerr << "upper_slope " << format_double(p.upper_slope)
              << (p.growth_fails ? " growth condition fails (profile plateaus)\n" : " growth visible\n");
  });

  // identities
  auto* idn = app.add_subcommand("identities", "Exact identity residuals at A = {root}");
  std::string idn_in;
  double idn_alpha = 1.0;
  bool idn_corrupt = false;
  idn->add_option("network", idn_in, "Network file or ensemble spec")->required();
  idn->add_option("--alpha", idn_alpha, "Resolvent rate")->capture_default_str();
  idn->add_flag("--corrupt-kernel", idn_corrupt, "Negative control: perturb the kernel");
  idn->callback([&] {
    const Network net = load_network(idn_in);
    const auto rows = run_identity_suite(net, {g.tolerance_scale, idn_alpha, idn_corrupt});
    Sink sink(g.out);
    write_identity_csv(sink.stream(), rows);
    if (!all_passed(rows)) status = 1;
  });

  // converge
  auto* conv = app.add_subcommand("converge", "Run a convergence plan and write report.json plus CSVs");
  ExperimentPlan plan;
  std::string conv_radii = "1,2,4,8,16,32", conv_times = "1,4", conv_scales_fn = "1,4,16";
  conv->add_option("--ensemble", plan.ensembles, "Ensemble spec per n, increasing (repeatable)")->required();
  conv->add_option("--alpha-R", plan.alpha_R, "Metric exponent")->capture_default_str();
  conv->add_option("--alpha-mu", plan.alpha_mu, "Measure exponent")->capture_default_str();
  conv->add_option("--alpha-t", plan.alpha_t, "Time exponent")->capture_default_str();
  conv->add_option("--alpha-phi", plan.alpha_phi, "Embedding exponent")->capture_default_str();
  conv->add_option("--radii", conv_radii, "Radii grid (rescaled units)")->capture_default_str();
  conv->add_option("--times", conv_times, "fdd times (rescaled units)")->capture_default_str();
  conv->add_option("--functional-scales", conv_scales_fn, "Scales s of exp(-d/s)")->capture_default_str();
  conv->add_option("--samples", plan.samples, "Monte-Carlo samples per n")->capture_default_str();
  conv->add_option("--max-ball-points", plan.max_ball_points, "Skip GHP on larger balls")->capture_default_str();
  conv->callback([&] {
    plan.radii = numbers(conv_radii);
    plan.times = numbers(conv_times);
    plan.functional_scales = numbers(conv_scales_fn);
    plan.seed = g.seed;
    plan.jobs = g.jobs;
    plan.tolerance_scale = g.tolerance_scale;
    plan.out_dir = g.out.empty() ? "converge-out" : g.out;
    const ExperimentReport rep = run_convergence(plan);
    std::cout << "report written to " << plan.out_dir << "/report.json\n"
              << "assumption_growth_fails " << (rep.growth_fails ? "true" : "false") << '\n'
              << "fdd_cauchy_successive_decreasing " << (rep.cauchy_decreasing ? "true" : "false") << '\n'
              << "identities_pass " << (rep.identities_pass ? "true" : "false") << '\n';
    if (!rep.identities_pass) status = 1;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const rfnet::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return status;
}
