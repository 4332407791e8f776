// Acceptance suite: one criterion per run (argv[1] in 1..9) or all when no
// argument is given.  Prints exactly one [PASS]/[FAIL] line per criterion and
// exits with the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "poplim/generator.hpp"
#include "poplim/harness.hpp"
#include "poplim/metrics.hpp"
#include "poplim/model.hpp"
#include "poplim/montecarlo.hpp"
#include "poplim/stein.hpp"

using namespace poplim;

namespace {

struct Outcome {
  bool pass = false;
  std::string name;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x) {
  std::ostringstream ss;
  ss.precision(3);
  ss << x;
  return ss.str();
}

// --- 1: exact approximation for immigration-death ---------------------------
Outcome criterion1() {
  Outcome o{true, "exactness oracle", ""};
  auto t0 = std::chrono::steady_clock::now();
  ModelSpec m = make_model("immigration_death", {{"a", 1.0}, {"b", 1.0}});
  Skeleton s = build_skeleton(m);
  double worst_pi = 0.0, worst_point = 0.0;
  for (long long n : {100LL, 400LL, 1600LL}) {
    auto [gen, pi] = solve_stationary_auto(m, s, n, 1e-12);
    auto oracle = oracles::birth_death_stationary(
        std::max<long long>(0, gen.lo), gen.hi,
        [&](long long) { return double(n); },
        [&](long long i) { return double(i); });
    for (long long i = oracle.lo(); i <= oracle.hi(); ++i)
      worst_pi = std::max(worst_pi, std::abs(pi.at(i) - oracle.at(i)));

    DistanceReport r = local_limit_error(m, s, n);
    worst_point = std::max(worst_point, r.sup_point);
  }
  double dt = seconds_since(t0);
  o.pass = worst_pi <= 1e-10 && worst_point <= 1e-8 && dt < 10.0;
  o.detail = "max |pi - poisson| = " + fmt(worst_pi) + " (<=1e-10), max sup_point = " +
             fmt(worst_point) + " (<=1e-8), " + fmt(dt) + "s (<10s)";
  return o;
}

// --- 2: generator decomposition identity ------------------------------------
Outcome criterion2() {
  Outcome o{true, "generator identity", ""};
  double worst_rel = 0.0;
  int cases = 0;
  const char* names[] = {"immigration_death", "sis", "three_jump"};
  const long long ns[] = {50, 100, 400, 1600};
  for (const char* name : names) {
    ModelSpec m = make_model(name);
    Skeleton s = build_skeleton(m);
    for (int rep = 0; rep < 334 && cases < 1000; ++rep, ++cases) {
      std::uint64_t hs = 7919 * cases + 13;
      StateFn h = [hs](long long t) { return oracles::hash_unit(hs, t); };
      long long n = ns[rep % 4];
      long long i = snapped_floor(double(n) * s.c) + (rep % 41) - 20;
      double direct = apply_generator(m, n, h, i);
      double split = apply_generator_decomposed(m, n, h, i);
      double rel = std::abs(direct - split) / std::max({1.0, std::abs(direct), std::abs(split)});
      worst_rel = std::max(worst_rel, rel);
    }
  }

  double worst_dual = 0.0;
  for (int j = 2; j <= 8; ++j) {
    for (int rep = 0; rep < 25; ++rep) {
      std::uint64_t gs = 104729 * j + rep;
      StateFn g = [gs](long long t) { return oracles::hash_unit(gs, t); };
      long long i = rep - 12;
      worst_dual = std::max(worst_dual, std::abs(coeff_up(g, j, i) - coeff_up_curv(g, j, i)));
      worst_dual =
          std::max(worst_dual, std::abs(coeff_down(g, j, i) - coeff_down_curv(g, j, i)));
    }
  }
  o.pass = cases == 1000 && worst_rel <= 1e-10 && worst_dual <= 1e-12;
  o.detail = "1000 cases, max rel diff = " + fmt(worst_rel) + " (<=1e-10), dual forms j<=8: " +
             fmt(worst_dual) + " (<=1e-12)";
  return o;
}

// --- 3: equilibrium annihilates the generator -------------------------------
Outcome criterion3() {
  Outcome o{true, "dynkin residual", ""};
  double worst = 0.0;
  long long n = 400;
  for (const std::string& name : builtin_models()) {
    ModelSpec m = make_model(name);
    Skeleton s = build_skeleton(m);
    auto [gen, pi] = solve_stationary_auto(m, s, n, 1e-10);
    long long c0 = snapped_floor(double(n) * s.c);
    double cap = std::pow(std::ceil(3.0 * std::sqrt(double(n) * s.var_scale)), 2.0);

    StateFn linear = [c0](long long i) { return double(i - c0); };
    StateFn quad_capped = [c0, cap](long long i) {
      return std::min(double(i - c0) * double(i - c0), cap);
    };
    StateFn point_a = [c0](long long i) { return i == c0 ? 1.0 : 0.0; };
    StateFn point_b = [c0](long long i) { return i == c0 + 3 ? 1.0 : 0.0; };
    for (const StateFn& h : {linear, quad_capped, point_a, point_b})
      worst = std::max(worst, dynkin_residual(gen, pi, h));
  }
  o.pass = worst <= 1e-8;
  o.detail = "max |E(Qh)| over 4 models x 4 test functions = " + fmt(worst) + " (<=1e-8)";
  return o;
}

// --- 4: Stein solution suite -------------------------------------------------
Outcome criterion4() {
  Outcome o{true, "stein suite", ""};
  double worst_plug = 0.0, worst_pmf_excess = -1.0, worst_h = 0.0;
  bool bounds_ok = true;
  for (double mu : {1.0, 10.0, 100.0, 1000.0}) {
    CentredPoisson cp(mu);
    double mx = 0.0;
    for (long long j = cp.table_lo(); j <= cp.table_hi(); ++j)
      mx = std::max(mx, cp.pmf_abs(j));
    worst_pmf_excess = std::max(worst_pmf_excess, mx - 1.0 / (2.0 * std::sqrt(mu)));

    long long fm = snapped_floor(mu);
    for (long long s : {0LL, fm, 3 * fm}) {
      SteinSolution sol = stein_solution(mu, s, s + 2 + fm);
      for (long long j = 0; j <= sol.j_hi - 1; ++j) {
        double ind = j == sol.s ? 1.0 : 0.0;
        worst_plug = std::max(
            worst_plug,
            std::abs(mu * sol.g(j + 1) - double(j) * sol.g(j) - (ind - sol.point_prob)));
      }
      BoundReport rep = norm_bounds_check(sol);
      bounds_ok = bounds_ok && rep.ok();
      worst_h = std::max(worst_h, rep.h_l1);
    }
  }
  o.pass = worst_plug <= 1e-12 && bounds_ok && worst_h <= 3.0 + 1e-9 && worst_pmf_excess <= 0.0;
  o.detail = "plug-back " + fmt(worst_plug) + " (<=1e-12), norm bounds " +
             (bounds_ok ? "hold" : "VIOLATED") + ", max ||h||_1 = " + fmt(worst_h) +
             " (<=3), pmf sup excess " + fmt(worst_pmf_excess) + " (<=0)";
  return o;
}

// shared by criteria 5 and 6
ConvergenceReport sis_sweep() {
  SweepConfig cfg;
  cfg.model = "sis";
  cfg.params = {{"beta", 2.0}, {"gamma", 1.0}};
  cfg.n_grid = {50, 100, 200, 400, 800, 1600, 3200};
  return run_sweep(cfg);
}

// --- 5: point-probability convergence rate ----------------------------------
Outcome criterion5() {
  Outcome o{true, "rate check", ""};
  auto t0 = std::chrono::steady_clock::now();
  ConvergenceReport rep = sis_sweep();
  const RateFit& f = rep.fits.at("sup_point");
  double mx = 0.0, mn = 1e300;
  for (const DistanceReport& r : rep.rows) {
    mx = std::max(mx, r.sup_point_norm());
    mn = std::min(mn, r.sup_point_norm());
  }
  double dt = seconds_since(t0);
  o.pass = f.slope <= -0.9 && f.r_squared >= 0.95 && mx / mn <= 5.0 && dt < 300.0;
  o.detail = "slope " + fmt(f.slope) + " (<=-0.9), r^2 " + fmt(f.r_squared) +
             " (>=0.95), normalized max/min " + fmt(mx / mn) + " (<=5), " + fmt(dt) +
             "s (<300s)";
  return o;
}

// --- 6: smoothing functionals stay on their scales --------------------------
Outcome criterion6() {
  Outcome o{true, "smoothing checks", ""};
  ConvergenceReport rep = sis_sweep();
  double tt_mx = 0.0, tt_mn = 1e300, mad_mx = 0.0, mad_mn = 1e300;
  for (const DistanceReport& r : rep.rows) {
    tt_mx = std::max(tt_mx, r.translate_tv_norm());
    tt_mn = std::min(tt_mn, r.translate_tv_norm());
    mad_mx = std::max(mad_mx, r.max_adjacent_diff_norm());
    mad_mn = std::min(mad_mn, r.max_adjacent_diff_norm());
  }
  o.pass = tt_mx / tt_mn <= 3.0 && mad_mx / mad_mn <= 5.0;
  o.detail = "translate_tv*sqrt(n) max/min " + fmt(tt_mx / tt_mn) +
             " (<=3), adjacent*n/sqrt(log n) max/min " + fmt(mad_mx / mad_mn) + " (<=5)";
  return o;
}

// --- 7: residual decomposition reconstructs the local error ------------------
Outcome criterion7() {
  Outcome o{true, "residual reconstruction", ""};
  ModelSpec m = make_model("sis");
  Skeleton s = build_skeleton(m);
  long long n = 200;
  auto [gen, pi] = solve_stationary_auto(m, s, n, 1e-12);
  LatticeDistribution pi_hat = pi.shifted(-snapped_floor(double(n) * s.c));
  double rn2 = stein_rn2(m, s, n, pi_hat);

  long long half = static_cast<long long>(std::ceil(4.0 * std::sqrt(double(n) * s.var_scale)));
  double worst_gap = -1e300;
  for (long long r = -half; r <= half; ++r) {
    ResidualBreakdown rb = stein_residual_terms(m, s, n, r, pi_hat, rn2);
    worst_gap = std::max(worst_gap, rb.direct_error - rb.reconstructed_bound);
  }

  // structural zeros
  LatticeDistribution toy = oracles::random_distribution(5, -6, 13);
  Skeleton hand;
  hand.c = 1.0;
  hand.drift_slope = -1.0;
  hand.var_rate_c = 2.0;
  hand.var_scale = 1.0;
  ModelSpec cm;
  cm.name = "const_rates";
  cm.jumps.push_back({1, [](double) { return 1.0; }, [](double) { return 0.0; }, 1.0});
  cm.jumps.push_back({-1, [](double) { return 1.0; }, [](double) { return 0.0; }, 1.0});
  cm.jumps.push_back({2, [](double) { return 0.5; }, [](double) { return 0.0; }, 0.5});
  cm.jumps.push_back({-2, [](double) { return 0.25; }, [](double) { return 0.0; }, 0.25});
  ResidualBreakdown rc = stein_residual_terms(cm, hand, 100, 0, toy, 0.0);
  bool const_zeros = rc.en3 == 0.0 && rc.en6 == 0.0;

  ModelSpec um = make_model("immigration_death");
  Skeleton us = build_skeleton(um);
  ResidualBreakdown ru = stein_residual_terms(um, us, 100, 0, toy, 0.0);
  bool unit_zeros = ru.en2 == 0.0 && ru.en4 == 0.0 && ru.en5 == 0.0 && ru.en7 == 0.0;

  o.pass = worst_gap <= 1e-9 && const_zeros && unit_zeros;
  o.detail = "max (direct - bound) over |r|<=" + std::to_string(half) + " is " +
             fmt(worst_gap) + " (<=1e-9); structural zeros " +
             (const_zeros && unit_zeros ? "hold" : "VIOLATED");
  return o;
}

// --- 8: Monte Carlo consistency ----------------------------------------------
Outcome criterion8() {
  Outcome o{true, "monte carlo consistency", ""};
  ModelSpec m = make_model("immigration_death");
  Skeleton s = build_skeleton(m);

  long long n = 100;
  long reps = 20000;
  EmpiricalPmf e = empirical_transient_pmf(m, n, 100, s.horizon, reps, 7);
  TruncatedGenerator gen = build_generator(m, s, n);
  LatticeDistribution oracle = transient_distribution(gen, 100, s.horizon, 1e-12);
  double worst_bins = 0.0;  // in standard-error units
  for (long long k = std::min(e.pmf.lo(), oracle.lo()); k <= std::max(e.pmf.hi(), oracle.hi());
       ++k) {
    double p = oracle.at(k);
    double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / double(reps));
    worst_bins = std::max(worst_bins, std::abs(e.pmf.at(k) - p) / se);
  }

  LikelihoodStats lr = likelihood_ratio_experiment(m, s, 400, 400, 20000, 11);
  double se = lr.sd_s / std::sqrt(double(lr.reps - lr.discarded));
  double mean_gap = std::abs(lr.mean_s - 1.0) / se;

  // also exercise the declining-rate branch of the capped martingale
  ModelSpec dm = make_model("declining");
  Skeleton ds = build_skeleton(dm);
  LikelihoodStats dl =
      likelihood_ratio_experiment(dm, ds, 4, snapped_floor(4.0 * ds.c), 20000, 77);

  bool increments_ok =
      lr.max_increment_ratio <= 1.0 + 1e-9 && dl.max_increment_ratio <= 1.0 + 1e-9;
  o.pass = worst_bins <= 4.0 && mean_gap <= 4.0 && increments_ok && dl.stop_rate_shock > 0;
  o.detail = "transient bins within " + fmt(worst_bins) + " se (<=4), mean_S off by " +
             fmt(mean_gap) + " se (<=4), increment ratios " + fmt(lr.max_increment_ratio) +
             "/" + fmt(dl.max_increment_ratio) + " (<=1), rate-shock stops " +
             std::to_string(dl.stop_rate_shock);
  return o;
}

// --- 9: equilibrium tail moments ---------------------------------------------
Outcome criterion9() {
  Outcome o{true, "tail moments", ""};
  std::ostringstream detail;
  bool pass = true;
  for (const std::string& name : builtin_models()) {
    ModelSpec m = make_model(name);
    Skeleton s = build_skeleton(m);
    double out_mx = 0.0, out_mn = 1e300, in_mx = 0.0, in_mn = 1e300;
    for (long long n : {50LL, 100LL, 200LL, 400LL, 800LL, 1600LL, 3200LL}) {
      auto [gen, pi] = solve_stationary_auto(m, s, n, 1e-12);
      auto [mo, m2] = tail_moments(pi, s.c, m.band_radius, n);
      out_mx = std::max(out_mx, double(n) * mo);
      out_mn = std::min(out_mn, double(n) * mo);
      in_mx = std::max(in_mx, double(n) * m2);
      in_mn = std::min(in_mn, double(n) * m2);
    }
    double out_ratio = out_mn > 0.0 ? out_mx / out_mn : std::numeric_limits<double>::infinity();
    double in_ratio = in_mn > 0.0 ? in_mx / in_mn : std::numeric_limits<double>::infinity();
    bool model_ok = out_ratio <= 5.0 && in_ratio <= 5.0;
    pass = pass && model_ok;
    detail << name << ": n*m_out ratio " << fmt(out_ratio) << ", n*m2_in ratio "
           << fmt(in_ratio) << "; ";
  }
  o.pass = pass;
  o.detail = detail.str() + "(both <=5 per model)";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  if (argc > 1) {
    which.push_back(std::atoi(argv[1]));
  } else {
    for (int i = 1; i <= 9; ++i) which.push_back(i);
  }

  int failures = 0;
  for (int i : which) {
    Outcome o;
    switch (i) {
      case 1: o = criterion1(); break;
      case 2: o = criterion2(); break;
      case 3: o = criterion3(); break;
      case 4: o = criterion4(); break;
      case 5: o = criterion5(); break;
      case 6: o = criterion6(); break;
      case 7: o = criterion7(); break;
      case 8: o = criterion8(); break;
      case 9: o = criterion9(); break;
      default:
        std::cerr << "unknown criterion " << i << "\n";
        return 64;
    }
    std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << i << ": " << o.name
              << " — " << o.detail << "\n";
    if (!o.pass) ++failures;
  }
  return failures;
}
