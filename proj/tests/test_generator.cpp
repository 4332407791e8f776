#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "poplim/errors.hpp"
#include "poplim/generator.hpp"
#include "poplim/metrics.hpp"

using namespace poplim;

namespace {

// Uniform constant-rate walk on a window; built by hand so tests control the
// centre and rates directly.
TruncatedGenerator symmetric_walk(long long lo, long long hi, double up, double down) {
  TruncatedGenerator g;
  g.n = 1;
  g.lo = lo;
  g.hi = hi;
  g.rows.resize(static_cast<std::size_t>(hi - lo + 1));
  g.diag.assign(g.rows.size(), 0.0);
  for (long long i = lo; i <= hi; ++i) {
    double out = 0.0;
    if (i + 1 <= hi) {
      g.rows[g.index(i)].emplace_back(static_cast<std::int32_t>(i + 1 - lo), up);
      out += up;
    }
    if (i - 1 >= lo) {
      g.rows[g.index(i)].emplace_back(static_cast<std::int32_t>(i - 1 - lo), down);
      out += down;
    }
    g.diag[g.index(i)] = -out;
  }
  return g;
}

}  // namespace

TEST_CASE("generator entries match n lambda_j(i/n)") {
  ModelSpec m = make_model("immigration_death");
  Skeleton s = build_skeleton(m);
  TruncatedGenerator g = build_generator(m, s, 10, 5);
  CHECK(g.rate(10, 11) == doctest::Approx(10.0));
  CHECK(g.rate(10, 9) == doctest::Approx(10.0));

  // top state has no outgoing up jump
  CHECK(g.rate(g.hi, g.hi + 1) == 0.0);
  bool top_has_up = false;
  for (const auto& [tgt, r] : g.rows[g.index(g.hi)])
    if (g.lo + tgt > g.hi) top_has_up = true;
  CHECK_FALSE(top_has_up);

  // conservative rows
  for (long long i = g.lo; i <= g.hi; ++i) {
    double sum = g.diag[g.index(i)];
    for (const auto& [tgt, r] : g.rows[g.index(i)]) sum += r;
    CHECK(sum == 0.0);
  }

  CHECK(g.lo <= snapped_floor(10.0 * s.c));
  CHECK(g.hi >= snapped_floor(10.0 * s.c));
  CHECK_THROWS_AS(build_generator(m, s, 10, 0), WindowTooSmall);
}

TEST_CASE("apply_generator examples") {
  ModelSpec m = make_model("immigration_death");
  SUBCASE("constant function is annihilated") {
    CHECK(apply_generator(m, 100, [](long long) { return 3.7; }, 42) == 0.0);
  }
  SUBCASE("identity gives n times drift") {
    long long n = 100, i = 100;
    double v = apply_generator(m, n, [](long long t) { return double(t); }, i);
    CHECK(v == doctest::Approx(n * drift(m, double(i) / n)).epsilon(1e-13));
    i = 73;
    v = apply_generator(m, n, [](long long t) { return double(t); }, i);
    CHECK(v == doctest::Approx(n * drift(m, double(i) / n)).epsilon(1e-13));
  }
  SUBCASE("squares under a single unit jump") {
    ModelSpec single;
    single.name = "single";
    single.jumps.push_back({1, [](double) { return 1.0; }, [](double) { return 0.0; }, 1.0});
    long long n = 50, i = 7;
    double v = apply_generator(single, n, [](long long t) { return double(t) * t; }, i);
    CHECK(v == doctest::Approx(double(n) * (2 * i + 1)).epsilon(1e-14));
  }
}

TEST_CASE("decomposed generator equals the direct form") {
  // randomized bounded-difference h over the built-in models
  int cases = 0;
  for (const std::string& name : {"immigration_death", "sis", "three_jump"}) {
    ModelSpec m = make_model(name);
    Skeleton s = build_skeleton(m);
    for (int rep = 0; rep < 80; ++rep) {
      std::uint64_t hs = 1000 * rep + 17;
      StateFn h = [hs](long long t) { return oracles::hash_unit(hs, t); };
      long long n = 25 + 25 * (rep % 8);
      long long i = snapped_floor(double(n) * s.c) + (rep % 21) - 10;
      double direct = apply_generator(m, n, h, i);
      double decomposed = apply_generator_decomposed(m, n, h, i);
      CHECK(std::abs(direct - decomposed) <=
            1e-10 * std::max({1.0, std::abs(direct), std::abs(decomposed)}));
      ++cases;
    }
  }
  CHECK(cases == 240);
}

TEST_CASE("jump-excess coefficient dual forms agree") {
  for (int j = 2; j <= 6; ++j) {
    for (int rep = 0; rep < 20; ++rep) {
      std::uint64_t gs = 77 * j + rep;
      StateFn g = [gs](long long t) { return oracles::hash_unit(gs, t); };
      long long i = rep - 10;
      CHECK(coeff_up(g, j, i) == doctest::Approx(coeff_up_curv(g, j, i)).epsilon(1e-12));
      CHECK(coeff_down(g, j, i) == doctest::Approx(coeff_down_curv(g, j, i)).epsilon(1e-12));
    }
  }
  // j=2 closed form: the up coefficient is one second difference
  StateFn g = [](long long t) { return oracles::hash_unit(5, t); };
  long long i = 3;
  double d2 = g(i + 1) - 2 * g(i) + g(i - 1);
  CHECK(coeff_up_curv(g, 2, i) == doctest::Approx(d2).epsilon(1e-15));
}

TEST_CASE("stationary solve against detailed balance") {
  SUBCASE("immigration-death is truncated Poisson") {
    ModelSpec m = make_model("immigration_death");
    Skeleton s = build_skeleton(m);
    long long n = 100;
    auto [gen, pi] = solve_stationary_auto(m, s, n, 1e-12);
    auto oracle = oracles::birth_death_stationary(
        std::max<long long>(0, gen.lo), gen.hi,
        [&](long long) { return double(n) * 1.0; },
        [&](long long i) { return 1.0 * double(i); });
    for (long long i = oracle.lo(); i <= oracle.hi(); ++i)
      CHECK(std::abs(pi.at(i) - oracle.at(i)) <= 1e-10);
  }
  SUBCASE("two-state window") {
    double u = 0.7, d = 2.3;
    TruncatedGenerator g = symmetric_walk(0, 1, u, d);
    LatticeDistribution pi = stationary_distribution(g, 1e-13);
    CHECK(pi.at(0) == doctest::Approx(d / (u + d)).epsilon(1e-13));
    CHECK(pi.at(1) == doctest::Approx(u / (u + d)).epsilon(1e-13));
  }
  SUBCASE("symmetric constant rates give the uniform law") {
    TruncatedGenerator g = symmetric_walk(-5, 5, 1.0, 1.0);
    LatticeDistribution pi = stationary_distribution(g, 1e-12);
    for (long long i = -5; i <= 5; ++i)
      CHECK(pi.at(i) == doctest::Approx(1.0 / 11.0).epsilon(1e-11));
  }
}

TEST_CASE("transient distribution") {
  ModelSpec m = make_model("immigration_death");
  Skeleton s = build_skeleton(m);
  long long n = 60;
  TruncatedGenerator gen = build_generator(m, s, n);

  SUBCASE("zero time is a point mass") {
    LatticeDistribution d = transient_distribution(gen, 60, 0.0, 1e-12);
    CHECK(d.at(60) == 1.0);
    CHECK(d.mass() == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("mass is conserved") {
    LatticeDistribution d = transient_distribution(gen, 55, 0.8, 1e-12);
    CHECK(std::abs(d.mass() - 1.0) <= 1e-12);
  }
  SUBCASE("long horizons reach the stationary law") {
    double t = 50.0;  // 50 / |F'(c)|
    LatticeDistribution d = transient_distribution(gen, 60, t, 1e-10);
    LatticeDistribution pi = stationary_distribution(gen, 1e-12);
    CHECK(total_variation(d, pi) <= 10.0 * 1e-10);
  }
  SUBCASE("semigroup composition") {
    double s1 = 0.35, s2 = 0.9;
    LatticeDistribution one = transient_distribution(gen, 58, s1 + s2, 1e-12);
    LatticeDistribution two = evolve(gen, transient_distribution(gen, 58, s1, 1e-12), s2, 1e-12);
    CHECK(total_variation(one, two) <= 10.0 * 1e-12);
  }
}

TEST_CASE("dynkin residual on solved stationary laws") {
  ModelSpec m = make_model("immigration_death");
  Skeleton s = build_skeleton(m);
  long long n = 400;
  auto [gen, pi] = solve_stationary_auto(m, s, n, 1e-10);
  long long center = snapped_floor(double(n) * s.c);

  CHECK(dynkin_residual(gen, pi, [](long long) { return 2.5; }) == 0.0);
  CHECK(dynkin_residual(gen, pi, [center](long long i) { return double(i - center); }) <= 1e-8);
  CHECK(dynkin_residual(gen, pi, [center](long long i) { return i == center ? 1.0 : 0.0; }) <=
        1e-8);
}

TEST_CASE("stationary law is stable under window enlargement") {
  ModelSpec m = make_model("sis");
  Skeleton s = build_skeleton(m);
  long long n = 100;
  long long w = auto_halfwidth(s, n);
  TruncatedGenerator g1 = build_generator(m, s, n, w);
  TruncatedGenerator g2 = build_generator(m, s, n, w + (w + 3) / 4);
  LatticeDistribution p1 = stationary_distribution(g1, 1e-12);
  LatticeDistribution p2 = stationary_distribution(g2, 1e-12);
  double acc = 0.0;
  for (long long i = g1.lo; i <= g1.hi; ++i) acc += std::abs(p1.at(i) - p2.at(i));
  CHECK(0.5 * acc <= 1e-8);
}

TEST_CASE("window trimming keeps absorbing states out") {
  ModelSpec m = make_model("sis");
  Skeleton s = build_skeleton(m);
  // n small enough that the raw window would cover the absorbing origin
  TruncatedGenerator g = build_generator(m, s, 50);
  CHECK(g.lo >= 1);
  LatticeDistribution pi = stationary_distribution(g, 1e-12);
  pi.validate(1e-9);
  CHECK(pi.mean() > 20.0);  // concentrated near nc = 25, not at the origin
}
