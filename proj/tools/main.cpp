// Command line front end: each subcommand runs one verification activity
// (stationary solve, single-n approximation error, convergence sweep, path
// simulation, likelihood-ratio experiment, Stein bound check).

#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "poplim/errors.hpp"
#include "poplim/generator.hpp"
#include "poplim/harness.hpp"
#include "poplim/lattice.hpp"
#include "poplim/metrics.hpp"
#include "poplim/model.hpp"
#include "poplim/montecarlo.hpp"
#include "poplim/stein.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitInvariant = 4;

struct CommonOpts {
  std::string model = "immigration_death";
  std::vector<std::string> params;
  long long n = 100;
  std::string n_grid;
  double tol = 1e-12;
  long reps = 10000;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "json";
};

std::map<std::string, double> parse_params(const std::vector<std::string>& kvs) {
  std::map<std::string, double> out;
  for (const std::string& kv : kvs) {
    auto pos = kv.find('=');
    if (pos == std::string::npos || pos == 0)
      throw poplim::ConfigError("bad --param '" + kv + "', expected key=value");
    try {
      out[kv.substr(0, pos)] = std::stod(kv.substr(pos + 1));
    } catch (const std::exception&) {
      throw poplim::ConfigError("bad numeric value in --param '" + kv + "'");
    }
  }
  return out;
}

std::vector<long long> parse_grid(const std::string& grid) {
  std::vector<long long> out;
  std::stringstream ss(grid);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoll(item));
  }
  if (out.empty()) throw poplim::ConfigError("empty --n-grid");
  return out;
}

void write_text(const std::string& path, const std::string& body) {
  if (path.empty()) {
    std::cout << body;
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw poplim::ConfigError("cannot open output file: " + path);
  os << body;
  if (!os.good()) throw poplim::ConfigError("failed while writing: " + path);
}

int run_stationary(const CommonOpts& o, long long halfwidth) {
  poplim::ModelSpec m = poplim::make_model(o.model, parse_params(o.params));
  poplim::Skeleton skel = poplim::build_skeleton(m);
  poplim::LatticeDistribution pi;
  if (halfwidth > 0) {
    auto gen = poplim::build_generator(m, skel, o.n, halfwidth);
    pi = poplim::stationary_distribution(gen, o.tol);
  } else {
    pi = poplim::solve_stationary_auto(m, skel, o.n, o.tol).second;
  }
  pi.validate(1e-9);
  if (o.format == "csv") {
    std::ostringstream ss;
    poplim::write_csv(pi, ss);
    write_text(o.out, ss.str());
  } else {
    write_text(o.out, poplim::to_json(pi, o.n, m.name).dump(2) + "\n");
  }
  return kExitOk;
}

int run_approx(const CommonOpts& o) {
  poplim::ModelSpec m = poplim::make_model(o.model, parse_params(o.params));
  poplim::Skeleton skel = poplim::build_skeleton(m);
  poplim::DistanceReport r = poplim::local_limit_error(m, skel, o.n);
  r.validate();
  if (o.format == "csv") {
    std::ostringstream ss;
    poplim::write_report_csv_header(ss);
    poplim::write_report_csv_row(r, ss);
    write_text(o.out, ss.str());
  } else {
    nlohmann::json j{{"n", r.n},
                     {"model", m.name},
                     {"tv", r.tv},
                     {"sup_point", r.sup_point},
                     {"translate_tv", r.translate_tv},
                     {"max_adjacent_diff", r.max_adjacent_diff},
                     {"tv_norm", r.tv_norm()},
                     {"sup_point_norm", r.sup_point_norm()},
                     {"translate_tv_norm", r.translate_tv_norm()},
                     {"max_adjacent_diff_norm", r.max_adjacent_diff_norm()}};
    write_text(o.out, j.dump(2) + "\n");
  }
  return kExitOk;
}

int run_sweep_cmd(const CommonOpts& o) {
  poplim::SweepConfig cfg;
  cfg.model = o.model;
  cfg.params = parse_params(o.params);
  if (!o.n_grid.empty()) cfg.n_grid = parse_grid(o.n_grid);
  cfg.tol = o.tol;
  cfg.reps = o.reps;
  cfg.seed = o.seed;
  poplim::ConvergenceReport rep = poplim::run_sweep(cfg);
  std::string base = o.out.empty() ? "sweep_" + o.model : o.out;
  if (o.format == "csv" || o.format == "both") poplim::emit_report(rep, "csv", base + ".csv");
  if (o.format == "json" || o.format == "both") poplim::emit_report(rep, "json", base + ".json");
  std::cout << "wrote " << base << (o.format == "both" ? ".{csv,json}" : "." + o.format) << "\n";
  for (const auto& [name, f] : rep.fits)
    std::cout << name << ": slope " << poplim::format_double(f.slope) << ", r^2 "
              << poplim::format_double(f.r_squared) << "\n";
  return kExitOk;
}

int run_simulate(const CommonOpts& o, long long init, double horizon) {
  poplim::ModelSpec m = poplim::make_model(o.model, parse_params(o.params));
  if (init == std::numeric_limits<long long>::min()) {
    poplim::Skeleton skel = poplim::build_skeleton(m);
    init = poplim::snapped_floor(static_cast<double>(o.n) * skel.c);
  }
  poplim::PathSample p = poplim::simulate_path(m, o.n, init, horizon, o.seed);
  std::ostringstream ss;
  ss << "time,state\n";
  for (std::size_t l = 0; l < p.times.size(); ++l)
    ss << poplim::format_double(p.times[l]) << ',' << p.states[l] << '\n';
  write_text(o.out, ss.str());
  if (p.absorbed) std::cerr << "note: path reached an absorbing state\n";
  return kExitOk;
}

int run_lr(const CommonOpts& o, long long start) {
  poplim::ModelSpec m = poplim::make_model(o.model, parse_params(o.params));
  poplim::Skeleton skel = poplim::build_skeleton(m);
  if (start == std::numeric_limits<long long>::min())
    start = poplim::snapped_floor(static_cast<double>(o.n) * skel.c);
  poplim::LikelihoodStats st =
      poplim::likelihood_ratio_experiment(m, skel, o.n, start, o.reps, o.seed);
  write_text(o.out, poplim::to_json(st).dump(2) + "\n");
  if (st.max_increment_ratio > 1.0 + 1e-9) {
    std::cerr << "invariant violation: increment bound exceeded ("
              << st.max_increment_ratio << ")\n";
    return kExitInvariant;
  }
  return kExitOk;
}

int run_stein_check(const CommonOpts& o, double mu, long long s_point) {
  if (mu <= 0.0) {
    poplim::ModelSpec m = poplim::make_model(o.model, parse_params(o.params));
    poplim::Skeleton skel = poplim::build_skeleton(m);
    mu = static_cast<double>(o.n) * skel.var_scale;
  }
  if (s_point < 0) s_point = poplim::snapped_floor(mu);
  poplim::SteinSolution sol =
      poplim::stein_solution(mu, s_point, s_point + 2 + poplim::snapped_floor(mu));
  poplim::BoundReport rep = poplim::norm_bounds_check(sol);

  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : rep.items)
    items.push_back({{"name", it.name},
                     {"measured", it.measured},
                     {"bound", it.bound},
                     {"ok", it.ok}});
  nlohmann::json j{{"mu", mu}, {"s", s_point}, {"h_l1", rep.h_l1}, {"bounds", items}};
  write_text(o.out, j.dump(2) + "\n");
  if (!rep.ok()) {
    std::cerr << "invariant violation: a Stein norm bound failed\n";
    return kExitInvariant;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equilibrium local limit toolkit for density dependent jump chains"};
  app.set_config("--config", "", "Read options from a config file (same keys as flags)");
  app.require_subcommand(1);
  // Global flags may appear after the subcommand name.
  app.fallthrough();

  CommonOpts o;
  app.add_option("--model", o.model, "Model name (see `models` subcommand)");
  app.add_option("--param", o.params, "Model parameter key=value (repeatable)");
  app.add_option("--n", o.n, "Population scale n");
  app.add_option("--n-grid", o.n_grid, "Comma separated n grid for sweeps");
  app.add_option("--tol", o.tol, "Solver tolerance");
  app.add_option("--reps", o.reps, "Monte Carlo replicates");
  app.add_option("--seed", o.seed, "Master RNG seed");
  app.add_option("--out", o.out, "Output path (stdout when omitted)");
  app.add_option("--format", o.format, "Output format: csv, json (sweep also: both)");

  auto* stationary = app.add_subcommand("stationary", "Solve the equilibrium distribution");
  long long halfwidth = 0;
  stationary->add_option("--halfwidth", halfwidth, "Window halfwidth (0 = AUTO)");

  auto* approx = app.add_subcommand("approx", "Local limit error at a single n");

  auto* sweep = app.add_subcommand("sweep", "Errors across an n grid with rate fits");

  auto* simulate = app.add_subcommand("simulate", "One exact jump path");
  long long init = std::numeric_limits<long long>::min();
  double horizon = 10.0;
  simulate->add_option("--init", init, "Initial state (default floor(nc))");
  simulate->add_option("--horizon", horizon, "Simulation horizon");

  auto* lr = app.add_subcommand("lr-experiment", "Adjacent-start likelihood ratio experiment");
  long long start = std::numeric_limits<long long>::min();
  lr->add_option("--start", start, "Upper start state i (default floor(nc))");

  auto* stein = app.add_subcommand("stein-check", "Stein solution norm bounds");
  double mu = 0.0;
  long long s_point = -1;
  stein->add_option("--mu", mu, "Poisson mean (default n * var_scale of the model)");
  stein->add_option("--s", s_point, "Point set {s} (default floor(mu))");

  auto* models = app.add_subcommand("models", "List registered models");

  CLI11_PARSE(app, argc, argv);

  try {
    if (models->parsed()) {
      for (const std::string& name : poplim::builtin_models()) std::cout << name << "\n";
      return kExitOk;
    }
    if (stationary->parsed()) return run_stationary(o, halfwidth);
    if (approx->parsed()) return run_approx(o);
    if (sweep->parsed()) return run_sweep_cmd(o);
    if (simulate->parsed()) return run_simulate(o, init, horizon);
    if (lr->parsed()) return run_lr(o, start);
    if (stein->parsed()) return run_stein_check(o, mu, s_point);
    std::cerr << "no subcommand given\n";
    return kExitConfig;
  } catch (const poplim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const poplim::InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const poplim::SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
}
